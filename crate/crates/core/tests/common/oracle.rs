//! Random small rule sets and an exhaustive reachability oracle for
//! property verdicts.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use taprepair::automaton::{BuildOptions, Model, State};
use taprepair::checker::{check, Counterexample, Verdict};
use taprepair::env::ChannelTable;
use taprepair::props::{load_catalog, Property, Shape};
use taprepair::rule::{parse_rules, RuleSet};
use taprepair::scenario::{parse_scenario, Scenario};

const DECLS: &str = "\
ATTR presence.state {present,not_present} ENV
ATTR temperature.value [0..40] C TARDY
ATTR heater.switch {on,off}
ATTR window.switch {open,closed}
ATTR smoke.state {clear,detected} ENV
ATTR alarm.state {activated,unactivated}
";

fn pick<'a>(rng: &mut ChaCha8Rng, v: &[&'a str]) -> &'a str {
    v.choose(rng).unwrap()
}

fn constraint(rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..5) {
        0 => format!("presence = {}", pick(rng, &["present", "not_present"])),
        1 => format!("temperature {} {}", pick(rng, &["<", ">"]), rng.gen_range(15..=19)),
        2 => format!("heater = {}", pick(rng, &["on", "off"])),
        3 => format!("window = {}", pick(rng, &["open", "closed"])),
        _ => format!("smoke = {}", pick(rng, &["clear", "detected"])),
    }
}

fn action(rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..3) {
        0 => format!("heater = {}", pick(rng, &["on", "off"])),
        1 => format!("window = {}", pick(rng, &["open", "closed"])),
        _ => format!("alarm = {}", pick(rng, &["activated", "unactivated"])),
    }
}

/// A rule file text with one to three rules.
pub fn random_rules(rng: &mut ChaCha8Rng) -> String {
    let mut text = DECLS.to_string();
    for i in 0..rng.gen_range(1..=3) {
        let mut r = format!("r{}: IF {}", i + 1, constraint(rng));
        if rng.gen_bool(0.4) {
            r += &format!(" WHILE {}", constraint(rng));
        }
        r += &format!(" THEN {}", action(rng));
        match rng.gen_range(0..6) {
            0 => r += " AFTER 10min",
            1 => r += " FOR 10min",
            _ => {}
        }
        text += &r;
        text.push('\n');
    }
    text
}

pub fn random_scenario(rng: &mut ChaCha8Rng, set: &RuleSet) -> Scenario {
    let mut s = format!(
        "INIT temperature = {}\nOUTDOOR temperature = 10\n",
        rng.gen_range(15..=19)
    );
    for (attr, vals) in [
        ("presence", ["present", "not_present"]),
        ("heater", ["on", "off"]),
        ("window", ["open", "closed"]),
        ("smoke", ["clear", "detected"]),
        ("alarm", ["activated", "unactivated"]),
    ] {
        // leaving some initial values open gives several initial states
        if rng.gen_bool(0.7) {
            s += &format!("INIT {attr} = {}\n", pick(rng, &vals));
        }
    }
    parse_scenario(&s, set).unwrap()
}

fn bad(m: &Model, p: &Property, s: &State, pending: bool) -> bool {
    if !m.is_settled(s) {
        return false;
    }
    match p.shape {
        Shape::State => m.eval_pre(s, p) && !m.eval_atom(s, &p.post),
        Shape::Event => pending && !m.eval_atom(s, &p.post),
    }
}

fn carried(m: &Model, p: &Property, s: &State, pending: bool) -> bool {
    match p.shape {
        Shape::State => false,
        Shape::Event if m.is_settled(s) => m.eval_pre(s, p),
        Shape::Event => pending,
    }
}

/// Fewest transitions from an initial state to a violation, by exhaustive
/// breadth-first reachability over (state, obligation) pairs.
pub fn shortest_violation(m: &Model, p: &Property) -> Option<usize> {
    let mut seen: HashSet<(State, bool)> = HashSet::new();
    let mut q = VecDeque::new();
    for s in m.initial_states() {
        if seen.insert((s.clone(), false)) {
            q.push_back((s.clone(), false, 0usize));
        }
    }
    while let Some((s, pend, d)) = q.pop_front() {
        if bad(m, p, &s, pend) {
            return Some(d);
        }
        let out = carried(m, p, &s, pend);
        for (_, t) in m.successors(&s) {
            if seen.insert((t.clone(), out)) {
                q.push_back((t, out, d + 1));
            }
        }
    }
    None
}

/// Replays a counterexample against the model; returns a complaint if it is
/// not a path or does not end in a violation.
pub fn validate(m: &Model, p: &Property, c: &Counterexample) -> Result<(), String> {
    if !m.initial_states().contains(&c.states[0]) {
        return Err("does not start in an initial state".into());
    }
    let mut pend = false;
    for (i, l) in c.labels.iter().enumerate() {
        let (s, t) = (&c.states[i], c.target(i));
        if bad(m, p, s, pend) && i != c.violating_index {
            return Err(format!("earlier violation at {i}"));
        }
        if !m.successors(s).iter().any(|(x, y)| x == l && y == t) {
            return Err(format!("step {i} [{l}] is not a transition"));
        }
        pend = carried(m, p, s, pend);
    }
    let last = match c.labels.len() {
        0 => &c.states[0],
        n => c.target(n - 1),
    };
    if !bad(m, p, last, pend) {
        return Err("final state does not violate".into());
    }
    Ok(())
}

pub struct Sample {
    pub rules: String,
    pub properties: usize,
    pub states: usize,
}

#[derive(Default)]
pub struct OracleOutcome {
    pub samples: Vec<Sample>,
    pub checks: usize,
    pub violations: usize,
    pub mismatches: Vec<String>,
}

/// Draws rule sets until `want` of them give complete models of at most
/// `cap` states, and compares the checker with the oracle on each applicable
/// catalog property.
pub fn run(want: usize, cap: usize, seed: u64) -> OracleOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = ChannelTable::builtin();
    let catalog = load_catalog();
    let opts = BuildOptions {
        tick_sec: 300,
        ..Default::default()
    };
    let mut out = OracleOutcome::default();
    let mut attempts = 0;
    while out.samples.len() < want && attempts < want * 20 {
        attempts += 1;
        let text = random_rules(&mut rng);
        let set = parse_rules(&text).unwrap();
        let sc = random_scenario(&mut rng, &set);
        let props: Vec<&Property> = catalog.iter().filter(|p| p.applies_to(&set)).collect();
        let mut largest = 0;
        let mut results = Vec::new();
        let mut fits = true;
        for p in &props {
            let m = Model::for_properties(&set, &[p], &sc, &table, &opts);
            let a = m.clone().explore(cap);
            if !a.complete {
                fits = false;
                break;
            }
            largest = largest.max(a.states.len());
            results.push((p, m, check(&a, p)));
        }
        if !fits || props.is_empty() {
            continue;
        }
        for (p, m, r) in results {
            out.checks += 1;
            let expect = shortest_violation(&m, p);
            out.violations += expect.is_some() as usize;
            let problem = match (&r.verdict, expect) {
                (Verdict::Pass, None) => None,
                (Verdict::Violation(c), Some(d)) => match validate(&m, p, c) {
                    Err(e) => Some(e),
                    Ok(()) if c.labels.len() != d => Some(format!("length {} but shortest is {d}", c.labels.len())),
                    Ok(()) => None,
                },
                (v, e) => Some(format!("checker {v:?}, oracle {e:?}")),
            };
            if let Some(msg) = problem {
                out.mismatches.push(format!("{}: {msg}\n{text}", p.id));
            }
        }
        out.samples.push(Sample {
            rules: text,
            properties: props.len(),
            states: largest,
        });
    }
    out
}

/// Violation verdicts by property id, for quick lookups in tests.
pub fn verdicts(set: &RuleSet, sc: &Scenario, props: &[Property]) -> HashMap<String, bool> {
    let table = ChannelTable::builtin();
    let opts = BuildOptions {
        tick_sec: 300,
        ..Default::default()
    };
    props
        .iter()
        .map(|p| {
            let m = Model::for_properties(set, &[p], sc, &table, &opts);
            (p.id.clone(), shortest_violation(&m, p).is_some())
        })
        .collect()
}
