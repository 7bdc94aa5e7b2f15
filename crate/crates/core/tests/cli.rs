use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    format!("{}/data/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn scratch_dir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("taprepair-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn taprepair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_taprepair"))
        .args(args)
        .output()
        .unwrap()
}

fn g1(cmd: &str, extra: &[&str]) -> Output {
    let (r, s) = (fixture("g1.rules"), fixture("g1.scn"));
    let mut args = vec![cmd, "--rules", &r, "--scenario", &s, "--props", "P.22", "--tick", "300"];
    args.extend_from_slice(extra);
    taprepair(&args)
}

fn json_lines(o: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&o.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn violation_exits_one_with_json_lines() {
    let o = g1("check", &["--format", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let lines = json_lines(&o);
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["property"], "P.22");
    assert_eq!(lines[0]["status"], "violation");
    assert_eq!(lines[0]["patterns"][0]["tag"], "V4");
    assert_eq!(lines[1]["summary"]["open"], 1);
}

#[test]
fn repaired_rules_check_clean() {
    let dir = scratch_dir("repair");
    let out = dir.join("fixed.rules");
    let o = g1("repair", &["--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("ADD CONDITION r1"), "{text}");

    let s = fixture("g1.scn");
    let o = taprepair(&[
        "check",
        "--rules",
        out.to_str().unwrap(),
        "--scenario",
        &s,
        "--props",
        "P.22",
        "--tick",
        "300",
    ]);
    assert_eq!(o.status.code(), Some(0));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn output_is_deterministic() {
    let strip = |o: &Output| {
        json_lines(o)
            .into_iter()
            .map(|mut v| {
                if let Some(m) = v.as_object_mut() {
                    m.remove("millis");
                    if let Some(s) = m.get_mut("stats").and_then(Value::as_object_mut) {
                        s.remove("millis");
                    }
                }
                v
            })
            .collect::<Vec<_>>()
    };
    let a = g1("repair", &["--format", "json"]);
    let b = g1("repair", &["--format", "json"]);
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn pinned_off_heater_is_safe() {
    let dir = scratch_dir("pinned");
    let rules = dir.join("empty.rules");
    let scn = dir.join("pin.scn");
    std::fs::write(
        &rules,
        "ATTR presence.state {present,not_present} ENV\nATTR heater.switch {on,off}\n",
    )
    .unwrap();
    std::fs::write(&scn, "PIN heater = off\n").unwrap();
    let o = taprepair(&[
        "check",
        "--rules",
        rules.to_str().unwrap(),
        "--scenario",
        scn.to_str().unwrap(),
        "--props",
        "P.22",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json_lines(&o)[0]["status"], "safe");
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn bad_input_exits_two() {
    let dir = scratch_dir("bad");
    let rules = dir.join("bad.rules");
    std::fs::write(&rules, "ATTR heater.switch {on,off}\nIF lamp = on THEN heater = on\n").unwrap();
    let o = taprepair(&["check", "--rules", rules.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = taprepair(&["check", "--rules", "/nonexistent/x.rules"]);
    assert_eq!(o.status.code(), Some(2));

    let o = g1("check", &["--props", "P.999"]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn bench_repairs_everything() {
    let o = taprepair(&["bench", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let cases = json_lines(&o);
    assert_eq!(cases.len(), 7);
    assert!(cases.iter().all(|c| c["repaired"] == true && c["reverified"] == true));
}
