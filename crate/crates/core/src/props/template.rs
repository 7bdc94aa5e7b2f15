//! The nine surface templates, their normal forms and a finite-trace
//! evaluator for both.

use std::collections::BTreeMap;

use super::{Atom, Property, Shape};
use crate::rule::{AttributeId, Constraint, Op, RuleSet, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Template {
    /// [event] should never happen
    EventNever { event: Atom },
    /// [event] should always happen when [states]
    EventAlwaysWhen { event: Atom, when: Vec<Atom> },
    /// [event] should never happen when [states]
    EventNeverWhen { event: Atom, when: Vec<Atom> },
    /// [state] should always be active
    StateAlways { state: Atom },
    /// [state] should never be active
    StateNever { state: Atom },
    /// [states] should always occur together
    StatesAlwaysTogether { states: Vec<Atom> },
    /// [states] should never occur together
    StatesNeverTogether { states: Vec<Atom> },
    /// [state] should always be active while [states]
    StateAlwaysWhile { state: Atom, when: Vec<Atom> },
    /// [state] should never be active while [states]
    StateNeverWhile { state: Atom, when: Vec<Atom> },
}

impl Template {
    fn atoms(&self) -> Vec<&Atom> {
        match self {
            Template::EventNever { event } => vec![event],
            Template::EventAlwaysWhen { event, when } | Template::EventNeverWhen { event, when } => {
                std::iter::once(event).chain(when).collect()
            }
            Template::StateAlways { state } | Template::StateNever { state } => vec![state],
            Template::StatesAlwaysTogether { states } | Template::StatesNeverTogether { states } => {
                states.iter().collect()
            }
            Template::StateAlwaysWhile { state, when } | Template::StateNeverWhile { state, when } => {
                std::iter::once(state).chain(when).collect()
            }
        }
    }
}

fn pre_of(when: &[Atom]) -> Vec<Atom> {
    when.iter().filter(|a| **a != Atom::True).cloned().collect()
}

/// Maps a surface template onto one of the two normal forms.
pub fn normalize(id: &str, t: &Template, set: &RuleSet) -> Result<Property, String> {
    for a in t.atoms() {
        for (c, is_event) in a.constraints() {
            let d = set.decl(&c.attr).ok_or_else(|| format!("{} is not declared", c.attr))?;
            if is_event && d.is_tardy() && d.sensor_interval_sec.is_none() {
                return Err(format!(
                    "{} changes gradually and has no sensor to observe events",
                    c.attr
                ));
            }
        }
    }
    let (shape, pre, post) = match t {
        Template::EventNever { event } => (Shape::Event, vec![], event.negated()),
        Template::EventAlwaysWhen { event, when } => (Shape::Event, pre_of(when), event.clone()),
        Template::EventNeverWhen { event, when } => (Shape::Event, pre_of(when), event.negated()),
        Template::StateAlways { state } => (Shape::State, vec![], state.clone()),
        Template::StateNever { state } => (Shape::State, vec![], state.negated()),
        Template::StatesAlwaysTogether { states } => match states.as_slice() {
            [] => return Err("no states given".into()),
            [one] => (Shape::State, vec![], one.clone()),
            many => (Shape::State, vec![], Atom::And(many.to_vec())),
        },
        Template::StatesNeverTogether { states } => match states.split_last() {
            None => return Err("no states given".into()),
            Some((last, rest)) => (Shape::State, pre_of(rest), last.negated()),
        },
        Template::StateAlwaysWhile { state, when } => (Shape::State, pre_of(when), state.clone()),
        Template::StateNeverWhile { state, when } => (Shape::State, pre_of(when), state.negated()),
    };
    let p = Property {
        id: id.to_string(),
        shape,
        pre,
        post,
        permitted_latency_sec: None,
        tags: vec![],
    };
    p.check_against(set)?;
    Ok(p)
}

/// A finite sequence of attribute valuations.
pub type Trace = Vec<BTreeMap<AttributeId, Value>>;

fn holds_value(c: &Constraint, v: &Value) -> bool {
    match (v, &c.value) {
        (Value::Int(a), Value::Int(b)) => c.op.holds(*a, *b),
        (a, b) => match c.op {
            Op::Eq => a == b,
            Op::Neq => a != b,
            _ => false,
        },
    }
}

fn holds_at(c: &Constraint, trace: &Trace, i: usize) -> bool {
    trace[i].get(&c.attr).is_some_and(|v| holds_value(c, v))
}

pub(crate) fn eval_atom(a: &Atom, trace: &Trace, i: usize) -> bool {
    match a {
        Atom::True => true,
        Atom::State(c) => holds_at(c, trace, i),
        Atom::Event(c) => i > 0 && !holds_at(c, trace, i - 1) && holds_at(c, trace, i),
        Atom::ActiveWithin { .. } => false,
        Atom::Not(x) => !eval_atom(x, trace, i),
        Atom::And(v) => v.iter().all(|x| eval_atom(x, trace, i)),
    }
}

fn all_at(atoms: &[Atom], trace: &Trace, i: usize) -> bool {
    atoms.iter().all(|a| eval_atom(a, trace, i))
}

/// Normal-form semantics on a finite trace; X is weak (no obligation at the
/// last position).
pub fn eval_property_on_trace(p: &Property, trace: &Trace) -> bool {
    let n = trace.len();
    match p.shape {
        Shape::Event => (0..n).all(|i| i + 1 >= n || !all_at(&p.pre, trace, i) || eval_atom(&p.post, trace, i + 1)),
        Shape::State => (0..n).all(|i| !all_at(&p.pre, trace, i) || eval_atom(&p.post, trace, i)),
    }
}

/// Direct reading of each template, written without the normal forms.
pub fn eval_template_on_trace(t: &Template, trace: &Trace) -> bool {
    let n = trace.len();
    let at = |a: &Atom, i: usize| eval_atom(a, trace, i);
    match t {
        Template::EventNever { event } => !(1..n).any(|i| at(event, i)),
        Template::EventAlwaysWhen { event, when } => (1..n).all(|j| !all_at(when, trace, j - 1) || at(event, j)),
        Template::EventNeverWhen { event, when } => !(1..n).any(|j| all_at(when, trace, j - 1) && at(event, j)),
        Template::StateAlways { state } => (0..n).all(|i| at(state, i)),
        Template::StateNever { state } => !(0..n).any(|i| at(state, i)),
        Template::StatesAlwaysTogether { states } => (0..n).all(|i| states.iter().all(|s| at(s, i))),
        Template::StatesNeverTogether { states } => !(0..n).any(|i| states.iter().all(|s| at(s, i))),
        Template::StateAlwaysWhile { state, when } => (0..n).all(|i| !all_at(when, trace, i) || at(state, i)),
        Template::StateNeverWhile { state, when } => !(0..n).any(|i| all_at(when, trace, i) && at(state, i)),
    }
}
