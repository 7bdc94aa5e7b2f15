mod common;

use taprepair::automaton::{BuildOptions, Model};
use taprepair::checker::{check_model, classify_pattern, locate_violating_state, render, tags, VulnTag};
use taprepair::env::ChannelTable;
use taprepair::fixtures::BENCHMARK;

#[test]
fn checker_matches_exhaustive_oracle() {
    let out = common::oracle::run(50, 10_000, 2024);
    assert_eq!(out.samples.len(), 50, "not enough small rule sets");
    assert!(out.checks >= 50);
    assert!(out.mismatches.is_empty(), "{}", out.mismatches.join("\n---\n"));
    // the sample should exercise both outcomes
    eprintln!("{} checks, {} violations", out.checks, out.violations);
    assert!(out.violations > 0 && out.violations < out.checks);
    assert!(out.samples.iter().all(|s| s.states <= 10_000 && s.properties > 0));
}

fn fixture_run(i: usize) -> (Model, taprepair::checker::Counterexample, taprepair::rule::RuleSet) {
    let f = &BENCHMARK[i];
    let (set, sc, props) = f.load();
    let opts = BuildOptions {
        tick_sec: f.tick_sec,
        ..Default::default()
    };
    let m = Model::for_properties(&set, &[&props[0]], &sc, &ChannelTable::builtin(), &opts);
    let r = check_model(&m, &props[0], opts.state_cap);
    let c = r.counterexample().expect("fixture violates its property").clone();
    let oracle = common::oracle::shortest_violation(&m, &props[0]);
    assert_eq!(oracle, Some(c.labels.len()), "{}", f.name);
    common::oracle::validate(&m, &props[0], &c).unwrap();
    (m, c, set)
}

#[test]
fn benchmark_groups_get_their_patterns() {
    let table = ChannelTable::builtin();
    let expected = [VulnTag::V4, VulnTag::V5, VulnTag::V6, VulnTag::V7, VulnTag::V8];
    for (i, want) in expected.iter().enumerate() {
        let (m, c, set) = fixture_run(i);
        let rules: Vec<_> = m.rules().cloned().collect();
        let got = tags(&classify_pattern(&c, &rules, &set, &table));
        assert!(got.contains(want), "{}: {got:?}", BENCHMARK[i].name);
    }
}

#[test]
fn rule_free_fixtures_violate_without_patterns() {
    let table = ChannelTable::builtin();
    for i in 5..7 {
        let (m, c, set) = fixture_run(i);
        let rules: Vec<_> = m.rules().cloned().collect();
        assert!(classify_pattern(&c, &rules, &set, &table).is_empty());
    }
}

#[test]
fn violating_state_is_located_and_rendered() {
    let (m, c, _) = fixture_run(0);
    let f = &BENCHMARK[0];
    let (_, _, props) = f.load();
    assert_eq!(locate_violating_state(&m, &c, &props[0]).unwrap(), c.violating_index);
    let text = render(&m, &c);
    assert!(text.contains("<= violation"));
    assert!(text.contains("@heater.switch=on"));
    assert!(text.contains("[fire:r1]"));
}

#[test]
fn verdicts_repeat_across_runs() {
    let f = &BENCHMARK[4];
    let (set, sc, props) = f.load();
    let opts = BuildOptions {
        tick_sec: f.tick_sec,
        ..Default::default()
    };
    let run = || {
        let m = Model::for_properties(&set, &[&props[0]], &sc, &ChannelTable::builtin(), &opts);
        check_model(&m, &props[0], opts.state_cap)
    };
    assert_eq!(run(), run());
}

#[test]
fn small_cap_is_inconclusive_not_pass() {
    let f = &BENCHMARK[3];
    let (set, sc, props) = f.load();
    let opts = BuildOptions {
        tick_sec: f.tick_sec,
        ..Default::default()
    };
    let m = Model::for_properties(&set, &[&props[0]], &sc, &ChannelTable::builtin(), &opts);
    let a = m.explore(50);
    assert!(!a.complete);
    let r = taprepair::checker::check(&a, &props[0]);
    assert!(!r.passed());
}
