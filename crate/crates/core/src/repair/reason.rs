//! Searching the patched model for a run of the defect's environment
//! schedule that ends in the property's space, and judging whether such a
//! run is a usable patch.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::Serialize;

use super::abstraction::{AbstractModel, Step};
use crate::automaton::{BuildOptions, Label, Model, State};
use crate::checker::{pending_after, violates};
use crate::env::ChannelTable;
use crate::props::{Property, Shape};
use crate::rule::{AttributeId, RuleSet};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PatchClass {
    /// Feasible: the system itself removes the violation.
    #[serde(rename = "P_C")]
    Concrete,
    /// Relies on the physical environment behaving differently.
    #[serde(rename = "P_I")]
    Infeasible,
    /// Cannot remove the violation, or only through uncontrollable events.
    #[serde(rename = "P_X")]
    Excluded,
}

/// A run of the patched model through the defect's schedule.
#[derive(Debug, Clone)]
pub struct Run {
    pub states: Vec<State>,
    pub labels: Vec<Label>,
}

#[derive(Debug, Clone)]
pub enum Replay {
    NoPath,
    /// Some run of the schedule still violates the property.
    Violates,
    Success(Run, Box<Model>),
}

fn step_matches(m: &Model, step: &Step, src: &State, label: &Label, dst: &State) -> bool {
    let phys = |s: &State, a: &AttributeId| m.project_physical(s, std::slice::from_ref(a))[0];
    match (step, label) {
        (Step::Tick, Label::PhysicalTick) => true,
        (Step::Set(a, v), Label::EnvChange(b)) => a == b && phys(dst, a) == Some(*v),
        (Step::Drift(a, d), Label::EnvChange(b)) => {
            a == b && phys(dst, a).zip(phys(src, a)).is_some_and(|(x, y)| x - y == *d)
        }
        _ => false,
    }
}

/// An environment step that has nothing left to do in `s` (the attribute
/// already has the value, or sits at its bound).
fn step_vacuous(m: &Model, step: &Step, s: &State) -> bool {
    let phys = |a: &AttributeId| m.project_physical(s, std::slice::from_ref(a))[0];
    match step {
        Step::Tick => false,
        Step::Set(a, v) => phys(a).is_none_or(|x| x == *v),
        Step::Drift(a, d) => match (phys(a), m.attributes().iter().find(|i| &i.decl.id == a)) {
            (Some(x), Some(info)) => !(info.lo..=info.hi).contains(&(x + d)),
            _ => true,
        },
    }
}

fn success(m: &Model, p: &Property, s: &State, pending: bool) -> bool {
    match p.shape {
        Shape::State => m.eval_pre(s, p) && m.eval_atom(s, &p.post),
        Shape::Event => pending && m.eval_atom(s, &p.post),
    }
}

/// Replays the schedule on the rule set patched by `set`. Rule firings and
/// sensor updates are free; environment events and ticks follow the
/// schedule; tardy branches are free unless frozen.
pub fn replay(
    am: &AbstractModel,
    set: &RuleSet,
    scenario: &Scenario,
    table: &ChannelTable,
    opts: &BuildOptions,
) -> Replay {
    let p = &am.property;
    let m = Model::for_properties(set, &[p], scenario, table, opts);
    let attrs: Vec<AttributeId> = am.start.iter().map(|(a, _)| a.clone()).collect();
    let want: Vec<Option<i32>> = am.start.iter().map(|(_, v)| Some(*v)).collect();
    let frozen: Vec<(AttributeId, &std::collections::BTreeSet<i32>)> = am
        .frozen
        .iter()
        .filter_map(|a| am.prefix_values.get(a).map(|v| (a.clone(), v)))
        .collect();
    let admissible = |s: &State| {
        frozen
            .iter()
            .all(|(a, vals)| m.project_physical(s, std::slice::from_ref(a))[0].is_none_or(|v| vals.contains(&v)))
    };
    let bound = 2 * am.trace_len.max(1) + am.schedule.len();
    type Node = (State, usize, bool);
    let mut parent: HashMap<Node, Option<(Node, Label)>> = HashMap::new();
    let mut depth: HashMap<Node, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    for s in m.initial_states() {
        let got = m.project_physical(s, &attrs);
        // attributes outside the patched model do not constrain the start
        if got.iter().zip(&want).all(|(g, w)| g.is_none() || g == w) {
            let n = (s.clone(), 0, false);
            parent.insert(n.clone(), None);
            depth.insert(n.clone(), 0);
            queue.push_back(n);
        }
    }
    let mut found: Option<Node> = None;
    let mut seen_violation = false;
    let mut visited: HashSet<Node> = HashSet::new();
    while let Some(node) = queue.pop_front() {
        if !visited.insert(node.clone()) {
            continue;
        }
        let (s, mut pos, pending) = node.clone();
        let d = depth[&node];
        if m.is_settled(&s) {
            if violates(&m, p, &s, pending) {
                seen_violation = true;
                break;
            }
            while pos < am.schedule.len() && step_vacuous(&m, &am.schedule[pos], &s) {
                pos += 1;
            }
            if pos == am.schedule.len() {
                if success(&m, p, &s, pending) && found.is_none() {
                    found = Some(node.clone());
                }
                continue;
            }
        }
        if d >= bound {
            continue;
        }
        let settled = m.is_settled(&s);
        let np_base = pending_after(&m, p, &s, pending);
        for (label, t) in m.successors(&s) {
            if label == Label::Stutter || !admissible(&t) {
                continue;
            }
            let next_pos = if settled {
                if !step_matches(&m, &am.schedule[pos], &s, &label, &t) {
                    continue;
                }
                pos + 1
            } else {
                pos
            };
            let n = (t, next_pos, np_base);
            if !parent.contains_key(&n) {
                parent.insert(n.clone(), Some((node.clone(), label)));
                depth.insert(n.clone(), d + 1);
                queue.push_back(n);
            }
        }
    }
    if seen_violation {
        return Replay::Violates;
    }
    let Some(mut cur) = found else { return Replay::NoPath };
    let mut states = vec![cur.0.clone()];
    let mut labels = Vec::new();
    while let Some(Some((prev, l))) = parent.get(&cur) {
        labels.push(l.clone());
        states.push(prev.0.clone());
        cur = prev.clone();
    }
    states.reverse();
    labels.reverse();
    Replay::Success(Run { states, labels }, Box::new(m))
}

fn label_kind(l: &Label) -> u8 {
    match l {
        Label::RuleFire(_) => 0,
        Label::ActionComplete(_) => 1,
        Label::EnvChange(_) => 2,
        Label::PhysicalTick => 3,
        Label::SensorUpdate(_) => 4,
        Label::Stutter => 5,
    }
}

/// Classifies a successful run. Returns the class and, for P_I, the
/// device-independent attributes that left the values seen on the defect
/// trace.
pub fn check_local_feasibility(
    am: &AbstractModel,
    assignment: &[usize],
    run: &Run,
    m: &Model,
    defect_labels: &[Label],
) -> (PatchClass, Vec<AttributeId>) {
    if assignment.is_empty() {
        return (PatchClass::Excluded, vec![]);
    }
    let mut moved = Vec::new();
    for (a, vals) in &am.prefix_values {
        let out = run
            .states
            .iter()
            .any(|s| m.project_physical(s, std::slice::from_ref(a))[0].is_some_and(|v| !vals.contains(&v)));
        if out {
            moved.push(a.clone());
        }
    }
    if !moved.is_empty() {
        return (PatchClass::Infeasible, moved);
    }
    if let Some(last) = run.labels.last() {
        let kinds: Vec<u8> = defect_labels.iter().map(label_kind).collect();
        if !last.is_controllable() && !kinds.contains(&label_kind(last)) {
            return (PatchClass::Excluded, vec![]);
        }
    }
    (PatchClass::Concrete, vec![])
}
