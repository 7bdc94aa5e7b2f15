//! Structural vulnerability patterns over rule pairs seen on a
//! counterexample.

use std::fmt;

use serde::Serialize;

use super::Counterexample;
use crate::env::{implicit_effects, Channel, ChannelTable};
use crate::rule::{AttributeId, Constraint, Op, RuleSet, TapRule, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum VulnTag {
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
    V7,
    V8,
}

impl fmt::Display for VulnTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// `interferer` disturbs `victim` through `attr`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VulnPattern {
    pub tag: VulnTag,
    pub interferer: String,
    pub victim: String,
    pub attr: AttributeId,
    pub channel: Option<&'static str>,
}

impl fmt::Display for VulnPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} -> {} on {}",
            self.tag, self.interferer, self.victim, self.attr
        )?;
        if let Some(c) = self.channel {
            write!(f, " via {c}")?;
        }
        Ok(())
    }
}

/// Everything a rule may write: its assignments and its completion.
fn writes(r: &TapRule) -> Vec<(AttributeId, Value)> {
    let mut v = r.action.assignments.clone();
    v.extend(r.action.completion.iter().flatten().cloned());
    v
}

fn conflicts(a: &TapRule, b: &TapRule) -> Option<AttributeId> {
    for (x, v) in writes(a) {
        for (y, w) in writes(b) {
            if x == y && v != w {
                return Some(x);
            }
        }
    }
    None
}

/// Can both constraints hold at once?
fn overlap(set: &RuleSet, a: &Constraint, b: &Constraint) -> bool {
    if a.attr != b.attr {
        return true;
    }
    let Some(d) = set.decl(&a.attr) else { return true };
    let (lo, hi) = d.domain.bounds();
    (lo..=hi).any(|c| a.holds_code(&d.domain, c) && b.holds_code(&d.domain, c))
}

fn jointly_satisfiable(set: &RuleSet, a: &TapRule, b: &TapRule) -> bool {
    let ca: Vec<&Constraint> = std::iter::once(&a.trigger.constraint).chain(&a.conditions).collect();
    let cb: Vec<&Constraint> = std::iter::once(&b.trigger.constraint).chain(&b.conditions).collect();
    ca.iter().all(|x| cb.iter().all(|y| overlap(set, x, y)))
}

fn satisfied_by(set: &RuleSet, c: &Constraint, v: &Value) -> bool {
    set.decl(&c.attr)
        .and_then(|d| d.domain.encode(v).map(|code| c.holds_code(&d.domain, code)))
        .unwrap_or(false)
}

/// Direction a change must take to make `c` true: +1 up, -1 down, 0 either.
fn direction_to_satisfy(set: &RuleSet, c: &Constraint) -> i32 {
    match c.op {
        Op::Lt | Op::Leq => -1,
        Op::Gt | Op::Geq => 1,
        Op::Neq => 0,
        Op::Eq => {
            let Some(d) = set.decl(&c.attr) else { return 0 };
            let (lo, hi) = d.domain.bounds();
            match d.domain.encode(&c.value) {
                Some(v) if v == hi => 1,
                Some(v) if v == lo => -1,
                _ => 0,
            }
        }
    }
}

/// Signs of the physical effects the rule's writes have on `attr`'s channel.
fn effect_signs(r: &TapRule, attr: &AttributeId, table: &ChannelTable) -> (Option<Channel>, Vec<i32>) {
    let Some(ch) = Channel::of(attr) else {
        return (None, vec![]);
    };
    let signs = writes(r)
        .iter()
        .flat_map(|w| implicit_effects(w, table))
        .filter(|e| e.channel == ch)
        .map(|e| e.delta.units().signum())
        .collect();
    (Some(ch), signs)
}

/// Applies the eight pair tests. Trigger and condition interference take the
/// rules fired on the path as victims and any rule as interferer; action
/// interference needs both rules fired on the path.
pub fn classify_pattern(
    cex: &Counterexample,
    rules: &[TapRule],
    set: &RuleSet,
    table: &ChannelTable,
) -> Vec<VulnPattern> {
    let fired = cex.fired_rules();
    let on_path = |r: &TapRule| fired.contains(&r.id.as_str());
    let tardy = |a: &AttributeId| set.decl(a).is_some_and(|d| d.is_tardy());
    let mut out = Vec::new();
    let mut push = |tag, i: &TapRule, j: &TapRule, attr: &AttributeId, ch: Option<Channel>| {
        let p = VulnPattern {
            tag,
            interferer: i.id.clone(),
            victim: j.id.clone(),
            attr: attr.clone(),
            channel: ch.map(Channel::name),
        };
        if !out.contains(&p) {
            out.push(p);
        }
    };
    for j in rules.iter().filter(|r| on_path(r)) {
        for i in rules.iter().filter(|r| r.id != j.id) {
            let t = &j.trigger.constraint;
            // trigger interference
            if !tardy(&t.attr) && writes(i).iter().any(|(a, v)| a == &t.attr && satisfied_by(set, t, v)) {
                push(VulnTag::V1, i, j, &t.attr, None);
            }
            if tardy(&t.attr) {
                let want = direction_to_satisfy(set, t);
                let (ch, signs) = effect_signs(i, &t.attr, table);
                if signs.iter().any(|s| *s != 0 && (want == 0 || *s == want)) {
                    push(VulnTag::V4, i, j, &t.attr, ch);
                }
            }
            // condition interference
            for c in &j.conditions {
                if !tardy(&c.attr) && writes(i).iter().any(|(a, _)| a == &c.attr) {
                    push(VulnTag::V2, i, j, &c.attr, None);
                }
                if tardy(&c.attr) {
                    let (ch, signs) = effect_signs(i, &c.attr, table);
                    if signs.iter().any(|s| *s != 0) {
                        push(VulnTag::V8, i, j, &c.attr, ch);
                    }
                }
            }
        }
    }
    // action interference, unordered pairs fired on the path
    let fired_rules: Vec<&TapRule> = rules.iter().filter(|r| on_path(r)).collect();
    for (k, i) in fired_rules.iter().enumerate() {
        for j in &fired_rules[k + 1..] {
            let Some(attr) = conflicts(i, j) else { continue };
            let extended = i.is_extended() || j.is_extended();
            let delayed = i.has_delay() || j.has_delay();
            if extended {
                push(VulnTag::V7, i, j, &attr, None);
            } else if !delayed {
                if jointly_satisfiable(set, i, j) {
                    push(VulnTag::V3, i, j, &attr, None);
                }
            } else if overlap(set, &i.trigger.constraint, &j.trigger.constraint) {
                push(VulnTag::V5, i, j, &attr, None);
            } else {
                // the longer-delayed rule overrides the other
                let (a, b) = if i.delay_sec.unwrap_or(0) >= j.delay_sec.unwrap_or(0) {
                    (i, j)
                } else {
                    (j, i)
                };
                push(VulnTag::V6, a, b, &attr, None);
            }
        }
    }
    out
}

/// Distinct tags, sorted.
pub fn tags(patterns: &[VulnPattern]) -> Vec<VulnTag> {
    let mut v: Vec<VulnTag> = patterns.iter().map(|p| p.tag).collect();
    v.sort();
    v.dedup();
    v
}
