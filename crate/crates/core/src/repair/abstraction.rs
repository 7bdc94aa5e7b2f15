//! Predicate flags over the rules of a defect trace and the abstract model
//! they span.
//!
//! Each flag stands for one predicate that may be added to the concrete
//! rules: a status predicate as a rule condition, a status predicate as the
//! wait of an extended action, a trigger or status predicate of one new
//! rule, or (second tier) removal of a rule or a changed action value.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::edit::{fresh_rule_id, RuleEdit};
use crate::automaton::Label;
use crate::checker::Counterexample;
use crate::props::Property;
use crate::rule::{Action, ActionKind, AttributeId, Constraint, Domain, Op, RuleSet, TapRule, Trigger, Value};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Flag {
    /// takeValue(attr) added to the conditions of `rule`.
    Condition {
        rule: String,
        attr: AttributeId,
        value: Value,
    },
    /// Completion of `rule`'s extended action waits for attr = value.
    Wait {
        rule: String,
        attr: AttributeId,
        value: Value,
    },
    /// isTrigger of the new rule.
    NewTrigger(Constraint),
    /// takeValue(attr) among the new rule's conditions.
    NewCondition {
        attr: AttributeId,
        value: Value,
    },
    RemoveRule(String),
    ModifyAction {
        rule: String,
        attr: AttributeId,
        value: Value,
    },
}

impl Flag {
    /// Second-tier flags undo user configuration and are tried last.
    pub fn is_destructive(&self) -> bool {
        matches!(self, Flag::RemoveRule(_) | Flag::ModifyAction { .. })
    }

    fn category(&self) -> u8 {
        match self {
            Flag::Wait { .. } => 0,
            Flag::Condition { .. } => 1,
            Flag::NewTrigger(_) | Flag::NewCondition { .. } => 2,
            Flag::RemoveRule(_) | Flag::ModifyAction { .. } => 3,
        }
    }

    fn attr(&self) -> Option<&AttributeId> {
        match self {
            Flag::Condition { attr, .. }
            | Flag::Wait { attr, .. }
            | Flag::NewCondition { attr, .. }
            | Flag::ModifyAction { attr, .. } => Some(attr),
            Flag::NewTrigger(c) => Some(&c.attr),
            Flag::RemoveRule(_) => None,
        }
    }

    /// Flags that compete for the same slot; at most one of a group may be
    /// set.
    fn group(&self) -> String {
        match self {
            Flag::Condition { rule, attr, .. } => format!("cond:{rule}:{attr}"),
            Flag::Wait { rule, .. } => format!("wait:{rule}"),
            Flag::NewTrigger(_) => "new:trigger".into(),
            Flag::NewCondition { attr, .. } => format!("new:cond:{attr}"),
            Flag::RemoveRule(rule) | Flag::ModifyAction { rule, .. } => format!("edit:{rule}"),
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flag::Condition { rule, attr, value } => write!(f, "{rule}.cond({attr} = {value})"),
            Flag::Wait { rule, attr, value } => write!(f, "{rule}.wait({attr} = {value})"),
            Flag::NewTrigger(c) => write!(f, "new.trigger({c})"),
            Flag::NewCondition { attr, value } => write!(f, "new.cond({attr} = {value})"),
            Flag::RemoveRule(r) => write!(f, "{r}.remove"),
            Flag::ModifyAction { rule, attr, value } => write!(f, "{rule}.action({attr} = {value})"),
        }
    }
}

/// One step of the uncontrollable schedule of a defect trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    /// An enumerated attribute takes this value.
    Set(AttributeId, i32),
    /// A tardy attribute drifts by this much.
    Drift(AttributeId, i32),
    Tick,
}

#[derive(Debug, Clone)]
pub struct AbstractModel {
    pub base: RuleSet,
    pub property: Property,
    /// Attributes of the relevance closure.
    pub attrs: Vec<AttributeId>,
    /// Rules fired on the defect trace; only these may be modified.
    pub trace_rules: Vec<String>,
    pub flags: Vec<Flag>,
    pub schedule: Vec<Step>,
    /// Initial physical values of the defect trace.
    pub start: Vec<(AttributeId, i32)>,
    pub trace_len: usize,
    /// Values each device-independent attribute took before the violation.
    pub prefix_values: BTreeMap<AttributeId, BTreeSet<i32>>,
    /// Attributes held to their `prefix_values` after refinement.
    pub frozen: BTreeSet<AttributeId>,
    /// Flag sets ruled out by refinement.
    pub invariants: BTreeSet<Vec<usize>>,
}

/// Flag indices, sorted.
pub type Assignment = Vec<usize>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0} predicates exceed the cap of {1}")]
pub struct TooManyPredicates(pub usize, pub usize);

/// Values worth offering as predicates for an attribute: all labels of an
/// enumeration, the configured constants of a range.
fn trigger_constraints(set: &RuleSet, prop: &Property, attr: &AttributeId) -> Vec<Constraint> {
    let Some(d) = set.decl(attr) else { return vec![] };
    match &d.domain {
        Domain::Enum(labels) => labels
            .iter()
            .map(|l| Constraint::eq(attr.clone(), Value::Label(l.clone())))
            .collect(),
        Domain::Range { .. } => {
            let mut vals = BTreeSet::new();
            for r in &set.rules {
                for c in std::iter::once(&r.trigger.constraint)
                    .chain(&r.conditions)
                    .chain(r.wait_trigger.as_ref())
                {
                    if &c.attr == attr {
                        if let Value::Int(n) = c.value {
                            vals.insert(n);
                        }
                    }
                }
            }
            for c in prop.constraints() {
                if &c.attr == attr {
                    if let Value::Int(n) = c.value {
                        vals.insert(n);
                    }
                }
            }
            vals.into_iter()
                .flat_map(|n| [Op::Lt, Op::Gt].map(|op| Constraint::new(attr.clone(), op, Value::Int(n))))
                .collect()
        }
    }
}

/// Controllable device states the property asks for; the action of any new
/// rule.
fn desired_writes(set: &RuleSet, property: &Property) -> Vec<(AttributeId, Value)> {
    property
        .desired_assignments()
        .into_iter()
        .filter(|(a, _)| set.decl(a).is_some_and(|d| d.controllable))
        .collect()
}

fn status_values(set: &RuleSet, attr: &AttributeId) -> Vec<Value> {
    match set.decl(attr).map(|d| &d.domain) {
        Some(Domain::Enum(labels)) => labels.iter().map(|l| Value::Label(l.clone())).collect(),
        // numeric attributes only get trigger predicates
        _ => vec![],
    }
}

/// Builds the flag universe for one defect trace. Histories of refuted
/// patches start empty.
#[allow(clippy::too_many_arguments)]
pub fn abstract_model(
    set: &RuleSet,
    property: &Property,
    attrs: &[AttributeId],
    cex: &Counterexample,
    model: &crate::automaton::Model,
    max_flags: usize,
) -> Result<AbstractModel, TooManyPredicates> {
    let trace_rules: Vec<String> = cex.fired_rules().iter().map(|s| s.to_string()).collect();
    let prop_attrs = property.attributes();
    let desired = desired_writes(set, property);
    let mut flags = Vec::new();
    for id in &trace_rules {
        let Some(r) = set.rule(id) else { continue };
        let used: Vec<&AttributeId> = std::iter::once(&r.trigger.constraint.attr)
            .chain(r.conditions.iter().map(|c| &c.attr))
            .chain(r.action.assignments.iter().map(|(a, _)| a))
            .collect();
        for a in attrs.iter().filter(|a| !used.contains(a)) {
            for v in status_values(set, a) {
                flags.push(Flag::Condition {
                    rule: id.clone(),
                    attr: a.clone(),
                    value: v,
                });
            }
        }
        if r.is_extended() && r.wait_trigger.is_none() {
            for a in attrs
                .iter()
                .filter(|a| !r.action.assignments.iter().any(|(x, _)| x == *a))
            {
                for v in status_values(set, a) {
                    flags.push(Flag::Wait {
                        rule: id.clone(),
                        attr: a.clone(),
                        value: v,
                    });
                }
            }
        }
    }
    if !desired.is_empty() {
        for a in attrs {
            for c in trigger_constraints(set, property, a) {
                // a trigger on the desired value itself can never help
                if desired
                    .iter()
                    .any(|(x, v)| x == &c.attr && c.op == Op::Eq && &c.value == v)
                {
                    continue;
                }
                flags.push(Flag::NewTrigger(c));
            }
        }
        for a in attrs {
            for v in status_values(set, a) {
                flags.push(Flag::NewCondition {
                    attr: a.clone(),
                    value: v,
                });
            }
        }
    }
    for id in &trace_rules {
        let Some(r) = set.rule(id) else { continue };
        flags.push(Flag::RemoveRule(id.clone()));
        for (a, v) in &r.action.assignments {
            for w in status_values(set, a).into_iter().filter(|w| w != v) {
                flags.push(Flag::ModifyAction {
                    rule: id.clone(),
                    attr: a.clone(),
                    value: w,
                });
            }
        }
    }
    if flags.len() > max_flags {
        return Err(TooManyPredicates(flags.len(), max_flags));
    }
    // property attributes first within each category, and a new rule
    // triggered by the property's own precondition before other triggers
    let pre: Vec<&Constraint> = property
        .pre
        .iter()
        .flat_map(|a| a.constraints())
        .map(|(c, _)| c)
        .collect();
    flags.sort_by_key(|f| {
        let off_pre = !matches!(f, Flag::NewTrigger(c) if pre.contains(&c));
        (f.category(), f.attr().is_none_or(|a| !prop_attrs.contains(a)), off_pre)
    });

    let (schedule, start, prefix_values) = environment_schedule(set, cex, model);
    Ok(AbstractModel {
        base: set.clone(),
        property: property.clone(),
        attrs: attrs.to_vec(),
        trace_rules,
        flags,
        schedule,
        start,
        trace_len: cex.labels.len(),
        prefix_values,
        frozen: BTreeSet::new(),
        invariants: BTreeSet::new(),
    })
}

type Schedule = (Vec<Step>, Vec<(AttributeId, i32)>, BTreeMap<AttributeId, BTreeSet<i32>>);

/// The uncontrollable events of the trace up to the violation, the initial
/// physical values, and the values of device-independent attributes seen on
/// the way.
fn environment_schedule(set: &RuleSet, cex: &Counterexample, m: &crate::automaton::Model) -> Schedule {
    let infos = m.attributes();
    let attrs: Vec<AttributeId> = infos.iter().map(|a| a.decl.id.clone()).collect();
    let phys = |s| m.project_physical(s, &attrs);
    let start: Vec<(AttributeId, i32)> = attrs
        .iter()
        .cloned()
        .zip(phys(&cex.states[0]))
        .filter_map(|(a, v)| v.map(|v| (a, v)))
        .collect();
    let end = if cex.lasso_start.is_some() {
        cex.labels.len()
    } else {
        cex.violating_index
    };
    let mut schedule = Vec::new();
    let mut prefix: BTreeMap<AttributeId, BTreeSet<i32>> = BTreeMap::new();
    for i in 0..end {
        let (src, dst) = (&cex.states[i], cex.target(i));
        match &cex.labels[i] {
            Label::EnvChange(a) => {
                let k = attrs.iter().position(|x| x == a).unwrap();
                let (from, to) = (phys(src)[k].unwrap(), phys(dst)[k].unwrap());
                if set.decl(a).is_some_and(|d| d.is_tardy()) {
                    schedule.push(Step::Drift(a.clone(), to - from));
                } else {
                    schedule.push(Step::Set(a.clone(), to));
                }
            }
            Label::PhysicalTick => schedule.push(Step::Tick),
            _ => {}
        }
    }
    for s in cex.states.iter().take(end + 1) {
        for (k, info) in infos.iter().enumerate() {
            if !info.decl.controllable {
                if let Some(v) = phys(s)[k] {
                    prefix.entry(info.decl.id.clone()).or_default().insert(v);
                }
            }
        }
    }
    (schedule, start, prefix)
}

impl AbstractModel {
    /// Per-group flag sums are 0 or 1, new-rule conditions need a new-rule
    /// trigger on another attribute, and a new rule triggered by the value it
    /// writes needs a condition.
    pub fn flag_sums_ok(&self, a: &[usize]) -> bool {
        let mut groups = BTreeSet::new();
        for &i in a {
            if !groups.insert(self.flags[i].group()) {
                return false;
            }
        }
        let trigger = a.iter().find_map(|&i| match &self.flags[i] {
            Flag::NewTrigger(c) => Some(c),
            _ => None,
        });
        let conds: Vec<&AttributeId> = a
            .iter()
            .filter_map(|&i| match &self.flags[i] {
                Flag::NewCondition { attr, .. } => Some(attr),
                _ => None,
            })
            .collect();
        match trigger {
            None => conds.is_empty(),
            Some(t) => {
                let writes_own = desired_writes(&self.base, &self.property)
                    .iter()
                    .any(|(x, _)| x == &t.attr);
                !conds.contains(&&t.attr) && (!writes_own || !conds.is_empty())
            }
        }
    }

    /// Ordering cost of an assignment: destructive edits after additive
    /// ones, then the number of flags.
    pub fn cost(&self, a: &[usize]) -> (bool, usize) {
        (a.iter().any(|&i| self.flags[i].is_destructive()), a.len())
    }

    /// Candidate assignments in the order they are tried: additive before
    /// destructive, fewer flags first, then by flag order.
    pub fn candidates(&self, max_size: usize) -> Vec<Assignment> {
        let n = self.flags.len();
        let mut out: Vec<Assignment> = vec![vec![]];
        let mut layer: Vec<Assignment> = vec![vec![]];
        for _ in 0..max_size {
            let mut next = Vec::new();
            for a in &layer {
                let from = a.last().map_or(0, |l| l + 1);
                for i in from..n {
                    let mut b = a.clone();
                    b.push(i);
                    next.push(b);
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out.retain(|a| self.flag_sums_ok(a));
        out.sort_by_key(|a| (self.cost(a), a.clone()));
        out
    }

    pub fn describe(&self, a: &[usize]) -> String {
        let v: Vec<String> = a.iter().map(|&i| self.flags[i].to_string()).collect();
        if v.is_empty() {
            "(none)".into()
        } else {
            v.join(", ")
        }
    }

    /// Lowers a flag assignment to rule edits.
    pub fn edits(&self, a: &[usize]) -> Vec<RuleEdit> {
        let mut edits = Vec::new();
        let mut new_trigger = None;
        let mut new_conds = Vec::new();
        for &i in a {
            match &self.flags[i] {
                Flag::Condition { rule, attr, value } => edits.push(RuleEdit::AddCondition(
                    rule.clone(),
                    Constraint::eq(attr.clone(), value.clone()),
                )),
                Flag::Wait { rule, attr, value } => edits.push(RuleEdit::ModifyLatency(
                    rule.clone(),
                    Constraint::eq(attr.clone(), value.clone()),
                )),
                Flag::NewTrigger(c) => new_trigger = Some(c.clone()),
                Flag::NewCondition { attr, value } => new_conds.push(Constraint::eq(attr.clone(), value.clone())),
                Flag::RemoveRule(r) => edits.push(RuleEdit::RemoveRule(r.clone())),
                Flag::ModifyAction { rule, attr, value } => {
                    let mut action = self.base.rule(rule).unwrap().action.clone();
                    for (x, v) in action.assignments.iter_mut() {
                        if x == attr {
                            *v = value.clone();
                        }
                    }
                    edits.push(RuleEdit::ModifyAction(rule.clone(), action));
                }
            }
        }
        if let Some(t) = new_trigger {
            let rule = TapRule {
                id: fresh_rule_id(&self.base),
                trigger: Trigger { constraint: t },
                conditions: new_conds,
                action: Action {
                    assignments: desired_writes(&self.base, &self.property),
                    kind: ActionKind::Immediate,
                    duration_sec: None,
                    completion: None,
                },
                delay_sec: None,
                wait_trigger: None,
            };
            edits.insert(0, RuleEdit::AddRule(rule));
        }
        edits
    }
}

/// Records a refuted patch: P_I freezes the device-independent attributes it
/// moved, anything else is excluded by a negation invariant.
pub fn refine(am: &mut AbstractModel, a: &[usize], moved: &[AttributeId]) {
    if moved.is_empty() {
        am.invariants.insert(a.to_vec());
    } else {
        am.frozen.extend(moved.iter().cloned());
    }
}
