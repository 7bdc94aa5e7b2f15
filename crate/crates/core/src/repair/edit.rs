//! Rule edits produced by repair, and applying them to a rule set.

use std::fmt;

use serde::Serialize;

use crate::rule::{Action, Constraint, ParseError, RuleSet, TapRule};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum RuleEdit {
    AddRule(TapRule),
    AddCondition(String, Constraint),
    ModifyAction(String, Action),
    /// Completion of the rule's extended action also waits for this.
    ModifyLatency(String, Constraint),
    RemoveRule(String),
}

impl RuleEdit {
    /// The existing rule this edit touches.
    pub fn target(&self) -> Option<&str> {
        match self {
            RuleEdit::AddRule(_) => None,
            RuleEdit::AddCondition(r, _)
            | RuleEdit::ModifyAction(r, _)
            | RuleEdit::ModifyLatency(r, _)
            | RuleEdit::RemoveRule(r) => Some(r),
        }
    }
}

impl fmt::Display for RuleEdit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleEdit::AddRule(r) => write!(f, "ADD RULE {r}"),
            RuleEdit::AddCondition(r, c) => write!(f, "ADD CONDITION {r}: {c}"),
            RuleEdit::ModifyAction(r, a) => {
                write!(f, "SET ACTION {r}:")?;
                for (i, (x, v)) in a.assignments.iter().enumerate() {
                    write!(f, "{} {x} = {v}", if i == 0 { "" } else { " AND" })?;
                }
                Ok(())
            }
            RuleEdit::ModifyLatency(r, c) => write!(f, "SET LATENCY {r}: UNTIL {c}"),
            RuleEdit::RemoveRule(r) => write!(f, "REMOVE RULE {r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EditError {
    #[error("edit refers to unknown rule {0}")]
    UnknownRule(String),
    #[error("edited rules are invalid: {0}")]
    Invalid(#[from] ParseError),
}

/// Applies edits in order and checks that the result prints and parses
/// back to itself.
pub fn apply_edits(set: &RuleSet, edits: &[RuleEdit]) -> Result<RuleSet, EditError> {
    let mut out = set.clone();
    for e in edits {
        let idx = |out: &RuleSet, id: &str| {
            out.rules
                .iter()
                .position(|r| r.id == id)
                .ok_or_else(|| EditError::UnknownRule(id.to_string()))
        };
        match e {
            RuleEdit::AddRule(r) => out.rules.push(r.clone()),
            RuleEdit::AddCondition(id, c) => {
                let i = idx(&out, id)?;
                out.rules[i].conditions.push(c.clone());
            }
            RuleEdit::ModifyAction(id, a) => {
                let i = idx(&out, id)?;
                out.rules[i].action = a.clone();
            }
            RuleEdit::ModifyLatency(id, c) => {
                let i = idx(&out, id)?;
                out.rules[i].wait_trigger = Some(c.clone());
            }
            RuleEdit::RemoveRule(id) => {
                let i = idx(&out, id)?;
                out.rules.remove(i);
            }
        }
    }
    out.validate()?;
    Ok(out)
}

/// A rule id of the form `fixN` not yet used in `set`.
pub fn fresh_rule_id(set: &RuleSet) -> String {
    (1..)
        .map(|n| format!("fix{n}"))
        .find(|id| set.rule(id).is_none())
        .unwrap()
}
