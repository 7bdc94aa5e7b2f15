use proptest::prelude::*;

use taprepair::automaton::{select_relevant, BuildOptions, Model};
use taprepair::checker::check_model;
use taprepair::env::ChannelTable;
use taprepair::fixtures::{BENCHMARK, PRIORITY_CONFLICT};
use taprepair::repair::{
    abstract_model, apply_edits, repair, AbstractModel, EditError, Flag, Limits, RepairContext, RuleEdit,
};
use taprepair::report::{bench_case, fixture_inputs, run_check, run_repair, Status};
use taprepair::rule::{parse_rules, Action, ActionKind, AttributeId, Constraint, Value};

fn eq(a: &str, v: &str) -> Constraint {
    Constraint::eq(AttributeId::parse(a).unwrap(), Value::Label(v.into()))
}

fn edits_for(i: usize) -> Vec<RuleEdit> {
    let f = &BENCHMARK[i];
    let (set, sc, props) = f.load();
    let table = ChannelTable::builtin();
    let ctx = RepairContext {
        scenario: &sc,
        table: &table,
        opts: BuildOptions {
            tick_sec: f.tick_sec,
            ..Default::default()
        },
        limits: Limits::default(),
        guard: vec![],
    };
    let (_, reps) = repair(&set, &props, &ctx);
    assert!(reps[0].repaired(), "{}: {:?}", f.name, reps[0].error);
    assert_eq!(reps[0].stats.flag_violations, 0);
    reps[0].edits.clone()
}

/// A new immediate rule `trigger -> attr = value` with no conditions.
fn is_plain_new_rule(e: &RuleEdit, trigger: &Constraint, write: (&str, &str)) -> bool {
    match e {
        RuleEdit::AddRule(r) => {
            r.trigger.constraint == *trigger
                && r.conditions.is_empty()
                && r.action.kind == ActionKind::Immediate
                && r.action.assignments == [(AttributeId::parse(write.0).unwrap(), Value::Label(write.1.into()))]
        }
        _ => false,
    }
}

#[test]
fn every_benchmark_case_is_repaired() {
    for f in &BENCHMARK {
        let c = bench_case(f, Limits::default());
        assert!(c.ok(), "{}: {c:?}", f.name);
        assert!(c.iterations <= 15 * 50);
    }
}

#[test]
fn heater_group_gets_presence_guard_and_shutoff_rule() {
    let edits = edits_for(0);
    assert!(edits.contains(&RuleEdit::AddCondition("r1".into(), eq("presence.state", "present"))));
    assert!(edits
        .iter()
        .any(|e| is_plain_new_rule(e, &eq("presence.state", "not_present"), ("heater.switch", "off"))));
}

#[test]
fn ventilation_group_waits_for_low_co2() {
    let edits = edits_for(3);
    assert!(!edits.is_empty());
    for e in &edits {
        match e {
            RuleEdit::ModifyLatency(_, c) => assert_eq!(c, &eq("co2.level", "low")),
            other => panic!("unexpected edit {other}"),
        }
    }
}

#[test]
fn missing_rules_are_synthesised() {
    let smoke = edits_for(5);
    assert_eq!(smoke.len(), 1);
    assert!(is_plain_new_rule(
        &smoke[0],
        &eq("smoke.state", "detected"),
        ("alarm.state", "activated")
    ));
    let ac = edits_for(6);
    assert_eq!(ac.len(), 1);
    assert!(is_plain_new_rule(
        &ac[0],
        &eq("ac.switch", "on"),
        ("heater.switch", "off")
    ));
}

#[test]
fn patched_rules_check_clean() {
    for f in &BENCHMARK {
        let (inputs, settings) = fixture_inputs(f);
        let report = run_repair(&inputs, &settings);
        let text = report.patched_rules.expect("rules changed");
        let mut again = inputs.clone();
        again.rules = parse_rules(&text).unwrap();
        let check = run_check(&again, &settings);
        assert!(check.entries.iter().all(|e| e.status == Status::Safe), "{}", f.name);
    }
}

#[test]
fn co_property_is_repaired_before_rain_property() {
    let (inputs, settings) = fixture_inputs(&PRIORITY_CONFLICT);
    let report = run_repair(&inputs, &settings);
    let order: Vec<&str> = report.entries.iter().map(|e| e.property.as_str()).collect();
    assert_eq!(order, ["P.53", "P.49"]);
    assert_eq!(report.entries[0].status, Status::Fixed);
    // both cannot hold when it rains during a CO leak
    assert_eq!(report.entries[1].status, Status::Unfixable);
    assert_eq!(report.exit_code(), 1);
}

#[test]
fn tiny_budget_stops_the_search() {
    let f = &BENCHMARK[0];
    let (set, sc, props) = f.load();
    let table = ChannelTable::builtin();
    let ctx = RepairContext {
        scenario: &sc,
        table: &table,
        opts: BuildOptions {
            tick_sec: f.tick_sec,
            ..Default::default()
        },
        limits: Limits {
            iter_limit: 1,
            round_limit: 1,
            ..Default::default()
        },
        guard: vec![],
    };
    let (_, reps) = repair(&set, &props, &ctx);
    assert!(!reps[0].repaired());
    assert!(reps[0].stats.iterations <= 1);
}

#[test]
fn edits_to_unknown_rules_fail() {
    let (set, _, _) = BENCHMARK[0].load();
    let e = apply_edits(&set, &[RuleEdit::RemoveRule("r9".into())]).unwrap_err();
    assert_eq!(e, EditError::UnknownRule("r9".into()));
    let ok = apply_edits(
        &set,
        &[RuleEdit::ModifyAction(
            "r1".into(),
            Action::immediate(AttributeId::parse("heater.switch").unwrap(), Value::Label("off".into())),
        )],
    )
    .unwrap();
    assert_eq!(ok.rules.len(), set.rules.len());
}

fn group1_abstraction() -> AbstractModel {
    let f = &BENCHMARK[0];
    let (set, sc, props) = f.load();
    let table = ChannelTable::builtin();
    let opts = BuildOptions {
        tick_sec: f.tick_sec,
        ..Default::default()
    };
    let m = Model::for_properties(&set, &[&props[0]], &sc, &table, &opts);
    let cex = check_model(&m, &props[0], opts.state_cap)
        .counterexample()
        .unwrap()
        .clone();
    let (_, attrs) = select_relevant(&set, &[&props[0]], &table);
    abstract_model(&set, &props[0], &attrs, &cex, &m, 64).unwrap()
}

#[test]
fn flag_universe_is_bounded() {
    let am = group1_abstraction();
    assert!(!am.flags.is_empty() && am.flags.len() <= 64);
    assert!(am.flags.iter().any(|f| matches!(f, Flag::NewTrigger(_))));
    // destructive flags sort last
    let first_destructive = am.flags.iter().position(Flag::is_destructive).unwrap();
    assert!(am.flags[first_destructive..].iter().all(Flag::is_destructive));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn candidates_respect_flag_sums(size in 1..=2usize) {
        let am = group1_abstraction();
        let cands = am.candidates(size);
        prop_assert!(cands.iter().all(|a| am.flag_sums_ok(a) && a.len() <= size));
        // additive before destructive, then by size
        let keys: Vec<_> = cands.iter().map(|a| am.cost(a)).collect();
        prop_assert!(keys.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn two_flags_of_one_group_are_rejected(i in 0..64usize, j in 0..64usize) {
        let am = group1_abstraction();
        let n = am.flags.len();
        let (i, j) = (i % n, j % n);
        prop_assume!(i != j);
        let same_slot = match (&am.flags[i], &am.flags[j]) {
            (Flag::Condition { rule: r1, attr: a1, .. }, Flag::Condition { rule: r2, attr: a2, .. }) => r1 == r2 && a1 == a2,
            (Flag::NewTrigger(_), Flag::NewTrigger(_)) => true,
            _ => false,
        };
        let mut a = vec![i.min(j), i.max(j)];
        a.dedup();
        if same_slot {
            prop_assert!(!am.flag_sums_ok(&a));
        }
        // a lone new-rule condition is never allowed
        if let Flag::NewCondition { .. } = am.flags[i] {
            prop_assert!(!am.flag_sums_ok(&[i]));
        }
    }
}
