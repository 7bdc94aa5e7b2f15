//! Relevance closure and domain compression.

use crate::env::{Channel, ChannelTable};
use crate::props::Property;
use crate::rule::{AttributeId, Domain, RuleSet, TapRule, Value};
use crate::scenario::Scenario;

use super::{BuildOptions, Role, VariableSpec};

/// Rules and attributes that can influence the properties: start from the
/// property attributes, pull in every rule touching one of them together
/// with its attributes and anything physically coupled, until nothing new
/// appears.
pub fn select_relevant(set: &RuleSet, props: &[&Property], table: &ChannelTable) -> (Vec<TapRule>, Vec<AttributeId>) {
    let mut attrs: Vec<AttributeId> = props
        .iter()
        .flat_map(|p| p.attributes())
        .filter(|a| set.decl(a).is_some())
        .collect();
    attrs.sort();
    attrs.dedup();
    let mut taken = vec![false; set.rules.len()];
    loop {
        let before = (attrs.len(), taken.iter().filter(|t| **t).count());
        for (i, r) in set.rules.iter().enumerate() {
            if !taken[i] && r.attributes().iter().any(|a| attrs.contains(a)) {
                taken[i] = true;
                attrs.extend(r.attributes());
            }
        }
        let mut coupled = Vec::new();
        for a in &attrs {
            if let Some(ch) = Channel::of(a) {
                // devices acting on this channel
                for d in &set.attrs {
                    if d.controllable && table.channels_of_device(&d.id).contains(&ch) {
                        coupled.push(d.id.clone());
                    }
                }
            }
            for ch in table.channels_of_device(a) {
                for d in &set.attrs {
                    if Channel::of(&d.id) == Some(ch) && !d.controllable {
                        coupled.push(d.id.clone());
                    }
                }
            }
        }
        attrs.extend(coupled);
        attrs.sort();
        attrs.dedup();
        if before == (attrs.len(), taken.iter().filter(|t| **t).count()) {
            break;
        }
    }
    let rules = set
        .rules
        .iter()
        .zip(&taken)
        .filter(|(_, t)| **t)
        .map(|(r, _)| r.clone())
        .collect();
    (rules, attrs)
}

/// Largest per-tick change a single effect can cause on `attr`, rounded up.
fn per_tick_margin(attr: &AttributeId, table: &ChannelTable, tick_sec: u32) -> i32 {
    let Some(ch) = Channel::of(attr) else { return 1 };
    table
        .effects
        .iter()
        .filter(|e| e.channel == ch)
        .map(|e| {
            let (a, b) = e.per_tick(tick_sec);
            a.abs().max(b.abs()).ceil() as i32
        })
        .max()
        .unwrap_or(1)
        .max(1)
}

/// Numeric domains shrink to the contiguous range spanned by the configured
/// constants plus one per-tick effect on either side; enumerations keep all
/// labels.
pub fn compress_domains(
    set: &RuleSet,
    rules: &[TapRule],
    attrs: &[AttributeId],
    props: &[&Property],
    scenario: &Scenario,
    table: &ChannelTable,
    opts: &BuildOptions,
) -> Vec<VariableSpec> {
    let mut out = Vec::new();
    for a in attrs {
        let decl = set.decl(a).expect("relevant attributes are declared");
        let (dmin, dmax) = decl.domain.bounds();
        let (lo, hi) = match &decl.domain {
            Domain::Range { .. } if opts.compress => {
                let mut vals: Vec<i32> = Vec::new();
                let mut push = |v: &Value| {
                    if let Value::Int(n) = v {
                        vals.push(*n);
                    }
                };
                for r in rules {
                    let cs = std::iter::once(&r.trigger.constraint)
                        .chain(&r.conditions)
                        .chain(r.wait_trigger.as_ref());
                    for c in cs.filter(|c| &c.attr == a) {
                        push(&c.value);
                    }
                    for (x, v) in &r.action.assignments {
                        if x == a {
                            push(v);
                        }
                    }
                }
                for p in props {
                    for c in p.constraints() {
                        if &c.attr == a {
                            push(&c.value);
                        }
                    }
                }
                if let Some(v) = scenario.initial_value(a) {
                    push(v);
                }
                if vals.is_empty() {
                    log::warn!("no configured values for {a}; keeping its full range");
                    (dmin, dmax)
                } else {
                    let m = per_tick_margin(a, table, opts.tick_sec);
                    let lo = vals.iter().min().unwrap() - m;
                    let hi = vals.iter().max().unwrap() + m;
                    (lo.max(dmin), hi.min(dmax))
                }
            }
            _ => (dmin, dmax),
        };
        out.push(VariableSpec {
            name: a.to_string(),
            attr: Some(a.clone()),
            rule: None,
            role: Role::Physical,
            lo,
            hi,
        });
    }
    out
}
