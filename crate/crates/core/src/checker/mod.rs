//! Explicit-state checking of properties against the automaton.
//!
//! Properties are judged on the sequence of settled states. A STATE property
//! fails at a settled state where pre holds and post does not. An EVENT
//! property raises an obligation at a settled state where pre holds; the
//! next settled state must satisfy post. The search runs over pairs of
//! automaton state and "obligation pending", breadth first, so the returned
//! counterexample is a shortest one.

mod classify;

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

pub use classify::{classify_pattern, tags, VulnPattern, VulnTag};

use crate::automaton::{Automaton, Label, Model, State};
use crate::props::{Property, Shape};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub states: Vec<State>,
    /// `labels[i]` leads from `states[i]` to `states[i + 1]`; with a lasso
    /// the last label leads back to `states[lasso_start]`.
    pub labels: Vec<Label>,
    pub lasso_start: Option<usize>,
    pub violating_index: usize,
}

impl Counterexample {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Target of the `i`-th transition.
    pub fn target(&self, i: usize) -> &State {
        if i + 1 < self.states.len() {
            &self.states[i + 1]
        } else {
            &self.states[self.lasso_start.expect("last label of a lasso")]
        }
    }

    /// Rules fired along the path, in order, without repeats.
    pub fn fired_rules(&self) -> Vec<&str> {
        let mut v: Vec<&str> = Vec::new();
        for l in &self.labels {
            if let Label::RuleFire(r) = l {
                if !v.contains(&r.as_str()) {
                    v.push(r);
                }
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Violation(Counterexample),
    /// The state cap stopped the search before it was exhaustive.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub verdict: Verdict,
    pub states_explored: usize,
    /// Depth of the deepest breadth-first layer reached.
    pub bound: usize,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        match &self.verdict {
            Verdict::Violation(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("no state on the counterexample violates {0}")]
    NoViolation(String),
}

trait Graph {
    fn initial(&self) -> Vec<State>;
    fn succ(&self, s: &State) -> Vec<(Label, State)>;
    fn model(&self) -> &Model;
}

impl Graph for Model {
    fn initial(&self) -> Vec<State> {
        self.initial_states().to_vec()
    }
    fn succ(&self, s: &State) -> Vec<(Label, State)> {
        self.successors(s)
    }
    fn model(&self) -> &Model {
        self
    }
}

impl Graph for Automaton {
    fn initial(&self) -> Vec<State> {
        self.initial.iter().map(|&i| self.states[i].clone()).collect()
    }
    fn succ(&self, s: &State) -> Vec<(Label, State)> {
        self.successors(s).unwrap_or_default()
    }
    fn model(&self) -> &Model {
        &self.model
    }
}

/// Does the settled state `s` violate `p`, given whether an EVENT obligation
/// is pending?
pub(crate) fn violates(m: &Model, p: &Property, s: &State, pending: bool) -> bool {
    match p.shape {
        Shape::State => m.eval_pre(s, p) && !m.eval_atom(s, &p.post),
        Shape::Event => pending && !m.eval_atom(s, &p.post),
    }
}

/// Obligation carried out of `s`.
pub(crate) fn pending_after(m: &Model, p: &Property, s: &State, pending: bool) -> bool {
    match p.shape {
        Shape::State => false,
        Shape::Event if m.is_settled(s) => m.eval_pre(s, p),
        Shape::Event => pending,
    }
}

fn intern(ids: &mut HashMap<State, u32>, states: &mut Vec<State>, s: State) -> u32 {
    *ids.entry(s.clone()).or_insert_with(|| {
        states.push(s);
        states.len() as u32 - 1
    })
}

fn search<G: Graph>(g: &G, p: &Property, cap: usize) -> CheckResult {
    let m = g.model();
    let mut ids: HashMap<State, u32> = HashMap::new();
    let mut states: Vec<State> = Vec::new();
    // node = state id * 2 + pending
    let mut parent: HashMap<u64, Option<(u64, Label)>> = HashMap::new();
    let mut depth: HashMap<u64, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut bound = 0;
    let mut truncated = false;
    let mut found: Option<(u64, Option<(u64, Label)>)> = None;
    'init: for s in g.initial() {
        if m.is_settled(&s) && violates(m, p, &s, false) {
            let id = intern(&mut ids, &mut states, s);
            let node = (id as u64) << 1;
            parent.insert(node, None);
            found = Some((node, None));
            break 'init;
        }
        let pend = pending_after(m, p, &s, false);
        let id = intern(&mut ids, &mut states, s);
        let node = ((id as u64) << 1) | pend as u64;
        if parent.insert(node, None).is_none() {
            depth.insert(node, 0);
            queue.push_back(node);
        }
    }
    while found.is_none() {
        let Some(u) = queue.pop_front() else { break };
        let du = depth[&u];
        bound = bound.max(du);
        let su = states[(u >> 1) as usize].clone();
        let pend = u & 1 == 1;
        for (label, t) in g.succ(&su) {
            if m.is_settled(&t) && violates(m, p, &t, pend) {
                let id = intern(&mut ids, &mut states, t);
                found = Some(((id as u64) << 1, Some((u, label))));
                break;
            }
            let np = pending_after(m, p, &t, pend);
            if states.len() >= cap && !ids.contains_key(&t) {
                truncated = true;
                continue;
            }
            let id = intern(&mut ids, &mut states, t);
            let node = ((id as u64) << 1) | np as u64;
            if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(node) {
                e.insert(Some((u, label)));
                depth.insert(node, du + 1);
                queue.push_back(node);
            }
        }
    }
    let explored = states.len();
    let Some((last, last_edge)) = found else {
        let verdict = if truncated {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        };
        return CheckResult {
            verdict,
            states_explored: explored,
            bound,
        };
    };
    // walk back from the edge that produced the violation
    let mut rev_nodes = Vec::new();
    let mut rev_labels = Vec::new();
    let mut cur = match last_edge {
        None => {
            rev_nodes.push(last);
            None
        }
        Some((u, l)) => {
            rev_labels.push(l);
            Some(u)
        }
    };
    while let Some(n) = cur {
        rev_nodes.push(n);
        cur = match &parent[&n] {
            Some((u, l)) => {
                rev_labels.push(l.clone());
                Some(*u)
            }
            None => None,
        };
    }
    rev_nodes.reverse();
    rev_labels.reverse();
    let path: Vec<u32> = rev_nodes.iter().map(|n| (n >> 1) as u32).collect();
    let target = (last >> 1) as u32;
    let mut cex_states: Vec<State> = path.iter().map(|&i| states[i as usize].clone()).collect();
    let (lasso_start, violating_index) = if rev_labels.len() == path.len() {
        // the violating edge leaves the last path state
        match path.iter().position(|&i| i == target) {
            Some(k) => (Some(k), k),
            None => {
                cex_states.push(states[target as usize].clone());
                (None, cex_states.len() - 1)
            }
        }
    } else {
        (None, cex_states.len() - 1)
    };
    CheckResult {
        verdict: Verdict::Violation(Counterexample {
            states: cex_states,
            labels: rev_labels,
            lasso_start,
            violating_index,
        }),
        states_explored: explored,
        bound,
    }
}

/// Checks `p` against an explored automaton.
pub fn check(a: &Automaton, p: &Property) -> CheckResult {
    let mut r = search(a, p, usize::MAX);
    if r.passed() && !a.complete {
        r.verdict = Verdict::Inconclusive;
    }
    r
}

/// Checks `p` while exploring the model lazily; stops early on the first
/// (shortest) violation.
pub fn check_model(m: &Model, p: &Property, cap: usize) -> CheckResult {
    search(m, p, cap)
}

/// Index of the first settled state on the path where the property fails.
pub fn locate_violating_state(m: &Model, cex: &Counterexample, p: &Property) -> Result<usize, CheckError> {
    let mut pending = false;
    let n = cex.labels.len() + 1;
    for i in 0..n {
        let s = if i < cex.states.len() {
            &cex.states[i]
        } else {
            cex.target(i - 1)
        };
        if m.is_settled(s) && violates(m, p, s, pending) {
            return Ok(if i < cex.states.len() {
                i
            } else {
                cex.lasso_start.unwrap()
            });
        }
        pending = pending_after(m, p, s, pending);
    }
    Err(CheckError::NoViolation(p.id.clone()))
}

/// Renders the path one state per line: changed attributes as `@attr=value`
/// events, with the transition label in front.
pub fn render(m: &Model, cex: &Counterexample) -> String {
    let mut out = String::new();
    let attrs: Vec<_> = m.attributes().iter().map(|a| a.decl.id.clone()).collect();
    let show = |s: &State, prev: Option<&State>| -> String {
        let mut parts = Vec::new();
        for a in &attrs {
            let v = m.value(s, a).unwrap();
            match prev.and_then(|p| m.value(p, a)) {
                Some(pv) if pv == v => parts.push(format!("{a}={v}")),
                Some(_) => parts.push(format!("@{a}={v}")),
                None => parts.push(format!("{a}={v}")),
            }
        }
        parts.join(" ")
    };
    for (i, s) in cex.states.iter().enumerate() {
        let mark = if i == cex.violating_index { " <= violation" } else { "" };
        let prev = i.checked_sub(1).map(|j| &cex.states[j]);
        match i.checked_sub(1).map(|j| &cex.labels[j]) {
            Some(l) => writeln!(out, "{i:>3} [{l}] {}{mark}", show(s, prev)).unwrap(),
            None => writeln!(out, "{i:>3} {}{mark}", show(s, prev)).unwrap(),
        }
    }
    if let Some(k) = cex.lasso_start {
        writeln!(out, "    [{}] back to {k}", cex.labels.last().unwrap()).unwrap();
    }
    out
}
