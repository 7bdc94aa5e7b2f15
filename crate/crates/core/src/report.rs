//! Check, repair and benchmark runs, and their reports.

use std::fmt::Write as _;

use serde::Serialize;

use crate::automaton::{BuildOptions, Model};
use crate::checker::{check_model, classify_pattern, render, tags, Verdict, VulnPattern};
use crate::env::ChannelTable;
use crate::fixtures::{Fixture, BENCHMARK};
use crate::props::{load_catalog, prioritize, PriorityTable, Property};
use crate::repair::{self, in_scope_properties, Limits, NprStats, RepairContext};
use crate::rule::RuleSet;
use crate::scenario::Scenario;

/// Loaded inputs of a run.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub rules: RuleSet,
    pub scenario: Scenario,
    pub table: ChannelTable,
    /// Selected properties, in any order.
    pub properties: Vec<Property>,
    /// Properties repair must not break when they hold beforehand.
    pub catalog: Vec<Property>,
}

#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub opts: BuildOptions,
    pub limits: Limits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Safe,
    Violation,
    Inconclusive,
    Fixed,
    Unfixable,
    NotApplicable,
}

#[derive(Debug, Clone, Serialize)]
pub struct Entry {
    pub property: String,
    pub status: Status,
    pub states: usize,
    pub patterns: Vec<VulnPattern>,
    pub counterexample: Option<String>,
    pub edits: Vec<String>,
    pub error: Option<String>,
    pub millis: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<NprStats>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub safe: usize,
    pub fixed: usize,
    pub unfixable: usize,
    /// Violations found by a check-only run, plus inconclusive ones.
    pub open: usize,
    pub patches: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub entries: Vec<Entry>,
    pub summary: Summary,
    /// The rule set after all edits, when repair changed anything.
    pub patched_rules: Option<String>,
}

impl Report {
    fn new(entries: Vec<Entry>, patched_rules: Option<String>) -> Report {
        let mut s = Summary::default();
        for e in &entries {
            match e.status {
                Status::Safe => s.safe += 1,
                Status::Fixed => {
                    s.fixed += 1;
                    s.patches += 1;
                }
                Status::Unfixable => s.unfixable += 1,
                Status::Violation | Status::Inconclusive => s.open += 1,
                Status::NotApplicable => {}
            }
        }
        Report {
            entries,
            summary: s,
            patched_rules,
        }
    }

    /// 0 when nothing is left violated, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.summary.unfixable + self.summary.open == 0 {
            0
        } else {
            1
        }
    }

    /// One JSON record per property, then the summary.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        let summary = serde_json::json!({ "summary": self.summary });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let status = serde_json::to_value(e.status).unwrap();
            writeln!(
                out,
                "{} {} ({} states, {} ms)",
                e.property,
                status.as_str().unwrap(),
                e.states,
                e.millis
            )
            .unwrap();
            for p in &e.patterns {
                writeln!(out, "  pattern {p}").unwrap();
            }
            if let Some(c) = &e.counterexample {
                for line in c.lines() {
                    writeln!(out, "  {line}").unwrap();
                }
            }
            for ed in &e.edits {
                writeln!(out, "  {ed}").unwrap();
            }
            if let Some(err) = &e.error {
                writeln!(out, "  error: {err}").unwrap();
            }
        }
        let s = &self.summary;
        writeln!(
            out,
            "safe {} fixed {} unfixable {} open {} patches {}",
            s.safe, s.fixed, s.unfixable, s.open, s.patches
        )
        .unwrap();
        out
    }
}

fn ordered(props: &[Property], seed: u64) -> Vec<Property> {
    prioritize(props, &PriorityTable::builtin(), seed)
}

fn blank(p: &Property, status: Status) -> Entry {
    Entry {
        property: p.id.clone(),
        status,
        states: 0,
        patterns: vec![],
        counterexample: None,
        edits: vec![],
        error: None,
        millis: 0,
        stats: None,
    }
}

/// Wall-clock timing for reports. wasm32 has no clock without a JS host, so
/// there it always reads zero.
struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    t0: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Stopwatch {
            #[cfg(not(target_arch = "wasm32"))]
            t0: std::time::Instant::now(),
        }
    }

    #[cfg(not(target_arch = "wasm32"))]
    fn millis(&self) -> u128 {
        self.t0.elapsed().as_millis()
    }

    #[cfg(target_arch = "wasm32")]
    fn millis(&self) -> u128 {
        0
    }
}

fn check_one(set: &RuleSet, p: &Property, inputs: &Inputs, settings: &Settings) -> Entry {
    let t0 = Stopwatch::start();
    if let Err(e) = p.check_against(set) {
        return Entry {
            error: Some(e),
            ..blank(p, Status::NotApplicable)
        };
    }
    let m = Model::for_properties(set, &[p], &inputs.scenario, &inputs.table, &settings.opts);
    let r = check_model(&m, p, settings.opts.state_cap);
    let mut e = blank(p, Status::Safe);
    e.states = r.states_explored;
    match &r.verdict {
        Verdict::Pass => {}
        Verdict::Inconclusive => {
            e.status = Status::Inconclusive;
            e.error = Some(format!("state cap of {} reached", settings.opts.state_cap));
        }
        Verdict::Violation(c) => {
            e.status = Status::Violation;
            let rules: Vec<_> = m.rules().cloned().collect();
            e.patterns = classify_pattern(c, &rules, set, &inputs.table);
            e.counterexample = Some(render(&m, c));
        }
    }
    e.millis = t0.millis();
    e
}

/// Detection only, one entry per selected property in priority order.
pub fn run_check(inputs: &Inputs, settings: &Settings) -> Report {
    let entries = ordered(&inputs.properties, settings.opts.seed)
        .iter()
        .map(|p| check_one(&inputs.rules, p, inputs, settings))
        .collect();
    Report::new(entries, None)
}

/// Detection followed by repair, in priority order; each repair starts
/// from the rules produced by the previous ones.
pub fn run_repair(inputs: &Inputs, settings: &Settings) -> Report {
    let targets = ordered(&inputs.properties, settings.opts.seed);
    let ids: Vec<&str> = targets.iter().map(|p| p.id.as_str()).collect();
    let others: Vec<Property> = inputs
        .catalog
        .iter()
        .filter(|p| !ids.contains(&p.id.as_str()))
        .cloned()
        .collect();
    let guard = in_scope_properties(&inputs.rules, &others, &inputs.scenario, &inputs.table, &settings.opts);
    let mut ctx = RepairContext {
        scenario: &inputs.scenario,
        table: &inputs.table,
        opts: settings.opts.clone(),
        limits: settings.limits,
        guard,
    };
    let mut current = inputs.rules.clone();
    let mut entries = Vec::new();
    for p in &targets {
        let t0 = Stopwatch::start();
        let mut e = check_one(&current, p, inputs, settings);
        if e.status == Status::Violation {
            let (patched, mut reps) = repair::repair(&current, std::slice::from_ref(p), &ctx);
            let rep = reps.remove(0);
            e.edits = rep.edits.iter().map(ToString::to_string).collect();
            if rep.repaired() {
                e.status = Status::Fixed;
                current = patched;
            } else {
                e.status = Status::Unfixable;
                e.error = rep.error.clone();
            }
            e.stats = Some(rep.stats);
        }
        // a target that holds now must keep holding
        if matches!(e.status, Status::Safe | Status::Fixed) {
            ctx.guard.push(p.clone());
        }
        e.millis = t0.millis();
        entries.push(e);
    }
    let patched = (current != inputs.rules).then(|| current.to_dsl());
    Report::new(entries, patched)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchCase {
    pub name: String,
    pub property: String,
    pub expected_pattern: Option<String>,
    pub patterns: Vec<String>,
    pub detected: bool,
    pub repaired: bool,
    pub reverified: bool,
    pub edits: Vec<String>,
    pub iterations: usize,
    pub millis: u128,
}

impl BenchCase {
    pub fn ok(&self) -> bool {
        let pattern_ok = self.expected_pattern.as_ref().is_none_or(|p| self.patterns.contains(p));
        self.detected && self.repaired && self.reverified && pattern_ok
    }
}

/// Loads a fixture into run inputs with the full catalog as guard.
pub fn fixture_inputs(f: &Fixture) -> (Inputs, Settings) {
    let (rules, scenario, properties) = f.load();
    let inputs = Inputs {
        rules,
        scenario,
        table: ChannelTable::builtin(),
        properties,
        catalog: load_catalog(),
    };
    let settings = Settings {
        opts: BuildOptions {
            tick_sec: f.tick_sec,
            ..Default::default()
        },
        limits: Limits::default(),
    };
    (inputs, settings)
}

/// Repairs one fixture and re-checks the patched rules against the target
/// and every catalog property that held before.
pub fn bench_case(f: &Fixture, limits: Limits) -> BenchCase {
    let (inputs, mut settings) = fixture_inputs(f);
    settings.limits = limits;
    let t0 = Stopwatch::start();
    let before = run_check(&inputs, &settings);
    let after = run_repair(&inputs, &settings);
    let millis = t0.millis();
    let patched = match &after.patched_rules {
        Some(text) => crate::rule::parse_rules(text).expect("patched rules parse"),
        None => inputs.rules.clone(),
    };
    let mut must_hold: Vec<Property> = inputs.properties.clone();
    must_hold.extend(in_scope_properties(
        &inputs.rules,
        &inputs.catalog,
        &inputs.scenario,
        &inputs.table,
        &settings.opts,
    ));
    let reverified = must_hold
        .iter()
        .all(|p| check_one(&patched, p, &inputs, &settings).status == Status::Safe);
    let first = &before.entries[0];
    BenchCase {
        name: f.name.to_string(),
        property: f.property.to_string(),
        expected_pattern: f.pattern.map(str::to_string),
        patterns: tags(&first.patterns).iter().map(ToString::to_string).collect(),
        detected: before.entries.iter().all(|e| e.status == Status::Violation),
        repaired: after.entries.iter().all(|e| e.status == Status::Fixed),
        reverified,
        edits: after.entries.iter().flat_map(|e| e.edits.clone()).collect(),
        iterations: after
            .entries
            .iter()
            .filter_map(|e| e.stats.as_ref())
            .map(|s| s.iterations)
            .sum(),
        millis,
    }
}

/// All seven benchmark groups.
pub fn run_bench(limits: Limits) -> Vec<BenchCase> {
    BENCHMARK.iter().map(|f| bench_case(f, limits)).collect()
}
