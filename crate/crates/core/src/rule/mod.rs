//! TAP rule data model: attributes, constraints, actions and rules, plus the
//! semantics/configuration projections of a rule.

mod parse;

use std::fmt;

use serde::{Deserialize, Serialize};

pub(crate) use parse::parse_value;
pub use parse::{parse_rules, resolve_name, ParseError, ParseErrorKind};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AttributeId {
    pub entity: String,
    pub capability: String,
}

impl AttributeId {
    pub fn new(entity: impl Into<String>, capability: impl Into<String>) -> Self {
        AttributeId {
            entity: entity.into(),
            capability: capability.into(),
        }
    }

    /// Parses `entity.capability`.
    pub fn parse(s: &str) -> Option<Self> {
        let (e, c) = s.split_once('.')?;
        if e.is_empty() || c.is_empty() {
            return None;
        }
        Some(AttributeId::new(e, c))
    }
}

impl fmt::Display for AttributeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.entity, self.capability)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttrKind {
    Immediate,
    Tardy,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    /// Ordered labels. For tardy attributes the order is the level order.
    Enum(Vec<String>),
    Range {
        min: i32,
        max: i32,
        unit: String,
    },
}

impl Domain {
    pub fn is_numeric(&self) -> bool {
        matches!(self, Domain::Range { .. })
    }

    pub fn labels(&self) -> &[String] {
        match self {
            Domain::Enum(l) => l,
            Domain::Range { .. } => &[],
        }
    }

    /// Encodes a value as the integer used inside automaton states: the label
    /// index for enumerations, the number itself for ranges.
    pub fn encode(&self, v: &Value) -> Option<i32> {
        match (self, v) {
            (Domain::Enum(labels), Value::Label(l)) => labels.iter().position(|x| x == l).map(|i| i as i32),
            (Domain::Range { min, max, .. }, Value::Int(n)) => (*min <= *n && *n <= *max).then_some(*n),
            _ => None,
        }
    }

    pub fn decode(&self, code: i32) -> Value {
        match self {
            Domain::Enum(labels) => {
                Value::Label(labels.get(code as usize).cloned().unwrap_or_else(|| format!("#{code}")))
            }
            Domain::Range { .. } => Value::Int(code),
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        self.encode(v).is_some()
    }

    /// The other label of a two-label domain.
    pub fn complement(&self, v: &Value) -> Option<Value> {
        match (self, v) {
            (Domain::Enum(labels), Value::Label(l)) if labels.len() == 2 => {
                labels.iter().find(|x| *x != l).map(|x| Value::Label(x.clone()))
            }
            _ => None,
        }
    }

    pub fn bounds(&self) -> (i32, i32) {
        match self {
            Domain::Enum(labels) => (0, labels.len() as i32 - 1),
            Domain::Range { min, max, .. } => (*min, *max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributeDecl {
    pub id: AttributeId,
    pub kind: AttrKind,
    pub domain: Domain,
    /// True iff a device action can set the attribute.
    pub controllable: bool,
    pub sensor_interval_sec: Option<u32>,
}

impl AttributeDecl {
    pub fn is_tardy(&self) -> bool {
        self.kind == AttrKind::Tardy
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Value {
    Label(String),
    Int(i32),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Label(l) => f.write_str(l),
            Value::Int(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    Eq,
    Neq,
    Lt,
    Leq,
    Gt,
    Geq,
}

impl Op {
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Eq => "=",
            Op::Neq => "!=",
            Op::Lt => "<",
            Op::Leq => "<=",
            Op::Gt => ">",
            Op::Geq => ">=",
        }
    }

    pub fn is_ordering(self) -> bool {
        matches!(self, Op::Lt | Op::Leq | Op::Gt | Op::Geq)
    }

    /// The operator of the logical complement.
    pub fn negated(self) -> Op {
        match self {
            Op::Eq => Op::Neq,
            Op::Neq => Op::Eq,
            Op::Lt => Op::Geq,
            Op::Leq => Op::Gt,
            Op::Gt => Op::Leq,
            Op::Geq => Op::Lt,
        }
    }

    pub fn holds(self, lhs: i32, rhs: i32) -> bool {
        match self {
            Op::Eq => lhs == rhs,
            Op::Neq => lhs != rhs,
            Op::Lt => lhs < rhs,
            Op::Leq => lhs <= rhs,
            Op::Gt => lhs > rhs,
            Op::Geq => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Constraint {
    pub attr: AttributeId,
    pub op: Op,
    pub value: Value,
}

impl Constraint {
    pub fn new(attr: AttributeId, op: Op, value: Value) -> Self {
        Constraint { attr, op, value }
    }

    pub fn eq(attr: AttributeId, value: Value) -> Self {
        Constraint::new(attr, Op::Eq, value)
    }

    pub fn negated(&self) -> Constraint {
        Constraint::new(self.attr.clone(), self.op.negated(), self.value.clone())
    }

    /// Evaluates against an encoded attribute value.
    pub fn holds_code(&self, domain: &Domain, code: i32) -> bool {
        match domain.encode(&self.value) {
            Some(rhs) => self.op.holds(code, rhs),
            // Out-of-domain constants still order correctly against ranges.
            None => match (&self.value, domain) {
                (Value::Int(n), Domain::Range { .. }) => self.op.holds(code, *n),
                _ => self.op == Op::Neq,
            },
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.attr, self.op.symbol(), self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trigger {
    pub constraint: Constraint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Immediate,
    Extended,
}

pub type Assignment = (AttributeId, Value);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub assignments: Vec<Assignment>,
    pub kind: ActionKind,
    pub duration_sec: Option<u32>,
    /// Applied when an extended action completes.
    pub completion: Option<Vec<Assignment>>,
}

impl Action {
    pub fn immediate(attr: AttributeId, value: Value) -> Self {
        Action {
            assignments: vec![(attr, value)],
            kind: ActionKind::Immediate,
            duration_sec: None,
            completion: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TapRule {
    pub id: String,
    pub trigger: Trigger,
    pub conditions: Vec<Constraint>,
    pub action: Action,
    /// Postponement before the action runs.
    pub delay_sec: Option<u32>,
    /// Completion of the extended action waits for this constraint.
    pub wait_trigger: Option<Constraint>,
}

impl TapRule {
    pub fn is_extended(&self) -> bool {
        self.action.kind == ActionKind::Extended
    }

    pub fn has_delay(&self) -> bool {
        self.delay_sec.is_some_and(|d| d > 0)
    }

    /// Every attribute the rule reads or writes.
    pub fn attributes(&self) -> Vec<AttributeId> {
        let mut v = vec![self.trigger.constraint.attr.clone()];
        v.extend(self.conditions.iter().map(|c| c.attr.clone()));
        v.extend(self.action.assignments.iter().map(|(a, _)| a.clone()));
        if let Some(w) = &self.wait_trigger {
            v.push(w.attr.clone());
        }
        v.sort();
        v.dedup();
        v
    }
}

fn fmt_duration(sec: u32) -> String {
    if sec > 0 && sec.is_multiple_of(3600) {
        format!("{}h", sec / 3600)
    } else if sec > 0 && sec.is_multiple_of(60) {
        format!("{}min", sec / 60)
    } else {
        format!("{sec}s")
    }
}

impl fmt::Display for TapRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: IF {}", self.id, self.trigger.constraint)?;
        for (i, c) in self.conditions.iter().enumerate() {
            f.write_str(if i == 0 { " WHILE " } else { " AND " })?;
            write!(f, "{c}")?;
        }
        f.write_str(" THEN ")?;
        for (i, (a, v)) in self.action.assignments.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            write!(f, "{a} = {v}")?;
        }
        if let Some(d) = self.action.duration_sec {
            write!(f, " FOR {}", fmt_duration(d))?;
        }
        if let Some(d) = self.delay_sec {
            write!(f, " AFTER {}", fmt_duration(d))?;
        }
        if let Some(w) = &self.wait_trigger {
            write!(f, " UNTIL {w}")?;
        }
        Ok(())
    }
}

impl fmt::Display for AttributeDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ATTR {} ", self.id)?;
        match &self.domain {
            Domain::Enum(labels) => write!(f, "{{{}}}", labels.join(","))?,
            Domain::Range { min, max, unit } => {
                write!(f, "[{min}..{max}]")?;
                if !unit.is_empty() {
                    write!(f, " {unit}")?;
                }
            }
        }
        if self.kind == AttrKind::Tardy {
            f.write_str(" TARDY")?;
        } else if !self.controllable {
            f.write_str(" ENV")?;
        }
        if let Some(s) = self.sensor_interval_sec {
            write!(f, " SENSOR {s}")?;
        }
        Ok(())
    }
}

/// Attribute declarations together with the rules that use them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub attrs: Vec<AttributeDecl>,
    pub rules: Vec<TapRule>,
}

impl RuleSet {
    pub fn decl(&self, id: &AttributeId) -> Option<&AttributeDecl> {
        self.attrs.iter().find(|d| &d.id == id)
    }

    pub fn rule(&self, id: &str) -> Option<&TapRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn to_dsl(&self) -> String {
        let mut out = String::new();
        for d in &self.attrs {
            out.push_str(&d.to_string());
            out.push('\n');
        }
        if !self.attrs.is_empty() && !self.rules.is_empty() {
            out.push('\n');
        }
        for r in &self.rules {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }

    /// Re-parses the printed form; used to validate edited rule sets.
    pub fn validate(&self) -> Result<(), ParseError> {
        let back = parse_rules(&self.to_dsl())?;
        if &back != self {
            return Err(ParseError {
                line: 0,
                col: 0,
                kind: ParseErrorKind::Invalid("rule set does not round-trip".into()),
            });
        }
        Ok(())
    }
}

/// Attribute names of a rule's trigger, conditions and action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleSemantics {
    pub trigger: AttributeId,
    pub conditions: Vec<AttributeId>,
    pub actions: Vec<AttributeId>,
    pub wait: Option<AttributeId>,
}

/// Values (with their comparison operators and latencies) of a rule.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleConfiguration {
    pub trigger: (Op, Value),
    pub conditions: Vec<(Op, Value)>,
    pub actions: Vec<Value>,
    pub kind: ActionKind,
    pub duration_sec: Option<u32>,
    pub completion: Option<Vec<Value>>,
    pub delay_sec: Option<u32>,
    pub wait: Option<(Op, Value)>,
}

impl RuleConfiguration {
    pub fn trigger_values(&self) -> Vec<Value> {
        vec![self.trigger.1.clone()]
    }
}

pub fn project_semantics(rule: &TapRule) -> RuleSemantics {
    RuleSemantics {
        trigger: rule.trigger.constraint.attr.clone(),
        conditions: rule.conditions.iter().map(|c| c.attr.clone()).collect(),
        actions: rule.action.assignments.iter().map(|(a, _)| a.clone()).collect(),
        wait: rule.wait_trigger.as_ref().map(|w| w.attr.clone()),
    }
}

pub fn project_configuration(rule: &TapRule) -> RuleConfiguration {
    RuleConfiguration {
        trigger: (rule.trigger.constraint.op, rule.trigger.constraint.value.clone()),
        conditions: rule.conditions.iter().map(|c| (c.op, c.value.clone())).collect(),
        actions: rule.action.assignments.iter().map(|(_, v)| v.clone()).collect(),
        kind: rule.action.kind,
        duration_sec: rule.action.duration_sec,
        completion: rule
            .action
            .completion
            .as_ref()
            .map(|c| c.iter().map(|(_, v)| v.clone()).collect()),
        delay_sec: rule.delay_sec,
        wait: rule.wait_trigger.as_ref().map(|w| (w.op, w.value.clone())),
    }
}

/// Rebuilds a rule from its two projections. Returns `None` when the shapes
/// disagree (different condition counts and so on).
pub fn compose(id: &str, sem: &RuleSemantics, conf: &RuleConfiguration) -> Option<TapRule> {
    if sem.conditions.len() != conf.conditions.len()
        || sem.actions.len() != conf.actions.len()
        || sem.wait.is_some() != conf.wait.is_some()
    {
        return None;
    }
    let completion = match &conf.completion {
        Some(vals) if vals.len() == sem.actions.len() => {
            Some(sem.actions.iter().cloned().zip(vals.iter().cloned()).collect())
        }
        Some(_) => return None,
        None => None,
    };
    Some(TapRule {
        id: id.to_string(),
        trigger: Trigger {
            constraint: Constraint::new(sem.trigger.clone(), conf.trigger.0, conf.trigger.1.clone()),
        },
        conditions: sem
            .conditions
            .iter()
            .zip(&conf.conditions)
            .map(|(a, (op, v))| Constraint::new(a.clone(), *op, v.clone()))
            .collect(),
        action: Action {
            assignments: sem.actions.iter().cloned().zip(conf.actions.iter().cloned()).collect(),
            kind: conf.kind,
            duration_sec: conf.duration_sec,
            completion,
        },
        delay_sec: conf.delay_sec,
        wait_trigger: match (&sem.wait, &conf.wait) {
            (Some(a), Some((op, v))) => Some(Constraint::new(a.clone(), *op, v.clone())),
            _ => None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_negation_is_involutive() {
        for op in [Op::Eq, Op::Neq, Op::Lt, Op::Leq, Op::Gt, Op::Geq] {
            assert_eq!(op.negated().negated(), op);
            for a in -2..3 {
                assert_ne!(op.holds(a, 0), op.negated().holds(a, 0));
            }
        }
    }

    #[test]
    fn duration_formatting() {
        assert_eq!(fmt_duration(900), "15min");
        assert_eq!(fmt_duration(7200), "2h");
        assert_eq!(fmt_duration(45), "45s");
        assert_eq!(fmt_duration(0), "0s");
    }

    #[test]
    fn binary_complement() {
        let d = Domain::Enum(vec!["on".into(), "off".into()]);
        assert_eq!(
            d.complement(&Value::Label("on".into())),
            Some(Value::Label("off".into()))
        );
        let d3 = Domain::Enum(vec!["a".into(), "b".into(), "c".into()]);
        assert_eq!(d3.complement(&Value::Label("a".into())), None);
    }
}
