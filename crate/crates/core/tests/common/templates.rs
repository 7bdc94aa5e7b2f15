//! Exhaustive comparison of template readings on short boolean traces.
//!
//! Three boolean attributes x, y, z; a trace position is a 3-bit mask. The
//! reference reading below works on masks and is written independently of
//! the library's evaluators.

use std::collections::BTreeMap;

use taprepair::props::{eval_property_on_trace, eval_template_on_trace, normalize, Atom, Template, Trace};
use taprepair::rule::{parse_rules, AttributeId, Constraint, RuleSet, Value};

pub const MAX_LEN: usize = 6;

#[derive(Clone, Copy, Debug)]
pub enum A {
    /// Variable (0..3) has this value.
    S(usize, bool),
    /// Variable became this value at this position.
    E(usize, bool),
}

fn name(v: usize) -> AttributeId {
    AttributeId::new(["x", "y", "z"][v], "s")
}

fn lit(b: bool) -> Value {
    Value::Label(if b { "t" } else { "f" }.into())
}

fn to_atom(a: A) -> Atom {
    match a {
        A::S(v, b) => Atom::State(Constraint::eq(name(v), lit(b))),
        A::E(v, b) => Atom::Event(Constraint::eq(name(v), lit(b))),
    }
}

fn bit(m: u8, v: usize) -> bool {
    m >> v & 1 == 1
}

fn holds(a: A, t: &[u8], i: usize) -> bool {
    match a {
        A::S(v, b) => bit(t[i], v) == b,
        A::E(v, b) => i > 0 && bit(t[i], v) == b && bit(t[i - 1], v) != b,
    }
}

fn all(v: &[A], t: &[u8], i: usize) -> bool {
    v.iter().all(|a| holds(*a, t, i))
}

#[derive(Clone, Debug)]
pub enum T {
    EventNever(A),
    EventAlwaysWhen(A, Vec<A>),
    EventNeverWhen(A, Vec<A>),
    StateAlways(A),
    StateNever(A),
    Together(Vec<A>),
    NeverTogether(Vec<A>),
    AlwaysWhile(A, Vec<A>),
    NeverWhile(A, Vec<A>),
}

impl T {
    /// Reference reading. Events are observed from the second position on;
    /// "when" refers to the position before the event.
    pub fn reference(&self, t: &[u8]) -> bool {
        let n = t.len();
        let mut steps = (1..n).map(|j| (j - 1, j));
        let mut pos = 0..n;
        match self {
            T::EventNever(e) => !(1..n).any(|j| holds(*e, t, j)),
            T::EventAlwaysWhen(e, w) => steps.all(|(i, j)| !all(w, t, i) || holds(*e, t, j)),
            T::EventNeverWhen(e, w) => !steps.any(|(i, j)| all(w, t, i) && holds(*e, t, j)),
            T::StateAlways(s) => pos.all(|i| holds(*s, t, i)),
            T::StateNever(s) => !pos.any(|i| holds(*s, t, i)),
            T::Together(v) => pos.all(|i| all(v, t, i)),
            T::NeverTogether(v) => !pos.any(|i| all(v, t, i)),
            T::AlwaysWhile(s, w) => pos.all(|i| !all(w, t, i) || holds(*s, t, i)),
            T::NeverWhile(s, w) => !pos.any(|i| all(w, t, i) && holds(*s, t, i)),
        }
    }

    pub fn to_template(&self) -> Template {
        let v = |x: &[A]| x.iter().map(|a| to_atom(*a)).collect::<Vec<_>>();
        match self {
            T::EventNever(e) => Template::EventNever { event: to_atom(*e) },
            T::EventAlwaysWhen(e, w) => Template::EventAlwaysWhen {
                event: to_atom(*e),
                when: v(w),
            },
            T::EventNeverWhen(e, w) => Template::EventNeverWhen {
                event: to_atom(*e),
                when: v(w),
            },
            T::StateAlways(s) => Template::StateAlways { state: to_atom(*s) },
            T::StateNever(s) => Template::StateNever { state: to_atom(*s) },
            T::Together(x) => Template::StatesAlwaysTogether { states: v(x) },
            T::NeverTogether(x) => Template::StatesNeverTogether { states: v(x) },
            T::AlwaysWhile(s, w) => Template::StateAlwaysWhile {
                state: to_atom(*s),
                when: v(w),
            },
            T::NeverWhile(s, w) => Template::StateNeverWhile {
                state: to_atom(*s),
                when: v(w),
            },
        }
    }
}

/// Every template with up to three atoms drawn from a fixed pool.
pub fn instances() -> Vec<T> {
    use A::*;
    let whens: Vec<Vec<A>> = vec![
        vec![],
        vec![S(1, true)],
        vec![S(1, true), S(2, false)],
        vec![E(1, true)],
    ];
    let mut out = vec![T::EventNever(E(0, true)), T::EventNever(E(0, false))];
    for w in &whens {
        out.push(T::EventAlwaysWhen(E(0, true), w.clone()));
        out.push(T::EventNeverWhen(E(0, true), w.clone()));
        out.push(T::AlwaysWhile(S(0, true), w.clone()));
        out.push(T::NeverWhile(S(0, true), w.clone()));
    }
    out.push(T::StateAlways(S(0, true)));
    out.push(T::StateNever(S(0, false)));
    let groups = [
        vec![S(0, true)],
        vec![S(0, true), S(1, false)],
        vec![S(0, true), S(1, true), S(2, true)],
    ];
    for g in groups {
        out.push(T::Together(g.clone()));
        out.push(T::NeverTogether(g));
    }
    out
}

fn decls() -> RuleSet {
    parse_rules("ATTR x.s {t,f} ENV\nATTR y.s {t,f} ENV\nATTR z.s {t,f} ENV\n").unwrap()
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub instances: usize,
    pub traces: usize,
    /// (template, trace) pairs where the three readings disagree.
    pub mismatches: Vec<String>,
}

/// Compares the reference reading, the library's direct reading and the
/// normal form on every trace of length 1..=MAX_LEN.
pub fn run() -> Outcome {
    let set = decls();
    let cases: Vec<_> = instances()
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let tpl = t.to_template();
            let p = normalize(&format!("T{i}"), &tpl, &set).expect("template normalizes");
            (t, tpl, p)
        })
        .collect();
    let valuations: Vec<BTreeMap<AttributeId, Value>> = (0..8u8)
        .map(|m| (0..3).map(|v| (name(v), lit(bit(m, v)))).collect())
        .collect();
    let mut out = Outcome {
        instances: cases.len(),
        ..Default::default()
    };
    let mut masks: Vec<u8> = Vec::new();
    let mut trace: Trace = Vec::new();
    // depth-first over all traces, each prefix being a trace of its own
    fn walk(
        masks: &mut Vec<u8>,
        trace: &mut Trace,
        vals: &[BTreeMap<AttributeId, Value>],
        cases: &[(T, Template, taprepair::props::Property)],
        out: &mut Outcome,
    ) {
        if !masks.is_empty() {
            out.traces += 1;
            for (t, tpl, p) in cases {
                let r = t.reference(masks);
                let direct = eval_template_on_trace(tpl, trace);
                let normal = eval_property_on_trace(p, trace);
                if r != direct || r != normal {
                    out.mismatches.push(format!(
                        "{t:?} on {masks:?}: reference {r}, direct {direct}, normal form {normal}"
                    ));
                }
            }
        }
        if masks.len() == MAX_LEN {
            return;
        }
        for m in 0..8u8 {
            masks.push(m);
            trace.push(vals[m as usize].clone());
            walk(masks, trace, vals, cases, out);
            masks.pop();
            trace.pop();
        }
    }
    walk(&mut masks, &mut trace, &valuations, &cases, &mut out);
    out
}
