use serde_json::Value;
use taprepair_web::{catalog_text, check_text, repair_text};

const RULES: &str = include_str!("../../core/data/fixtures/g1.rules");
const SCENARIO: &str = include_str!("../../core/data/fixtures/g1.scn");

#[test]
fn check_reports_the_violation() {
    let v: Value = serde_json::from_str(&check_text(RULES, SCENARIO, "P.22", 300).unwrap()).unwrap();
    assert_eq!(v["entries"][0]["status"], "violation");
}

#[test]
fn repair_returns_patched_rules() {
    let v: Value = serde_json::from_str(&repair_text(RULES, SCENARIO, "P.22", 300).unwrap()).unwrap();
    assert_eq!(v["summary"]["fixed"], 1);
    assert!(v["patched_rules"].as_str().unwrap().contains("presence.state"));
}

#[test]
fn catalog_lists_applicable_properties() {
    let text = catalog_text(RULES).unwrap();
    assert!(text.lines().any(|l| l.starts_with("PROP P.22 ")));
    assert!(catalog_text("IF x THEN").is_err());
}

#[test]
fn bad_scenario_is_an_error() {
    let e = check_text(RULES, "INIT lamp = on", "", 300).unwrap_err();
    assert!(e.starts_with("scenario:"), "{e}");
}
