//! Scenario files: initial values, pinned attributes and the outdoor
//! temperature.
//!
//! ```text
//! INIT temperature = 17
//! PIN presence.state = present
//! PIN heater
//! OUTDOOR temperature = 10
//! ```

use thiserror::Error;

use crate::lex::{lex_line, Cursor};
use crate::rule::{parse_value, resolve_name, AttributeId, RuleSet, Value};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Scenario {
    pub init: Vec<(AttributeId, Value)>,
    /// Attributes that never change on their own.
    pub pinned: Vec<AttributeId>,
    pub outdoor_temperature: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("scenario line {line}, column {col}: {msg}")]
pub struct ScenarioError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl Scenario {
    pub fn initial_value(&self, attr: &AttributeId) -> Option<&Value> {
        self.init.iter().find(|(a, _)| a == attr).map(|(_, v)| v)
    }

    pub fn is_pinned(&self, attr: &AttributeId) -> bool {
        self.pinned.contains(attr)
    }
}

pub fn parse_scenario(text: &str, set: &RuleSet) -> Result<Scenario, ScenarioError> {
    let mut sc = Scenario::default();
    for (i, line) in text.lines().enumerate() {
        let toks = lex_line(line).map_err(|(col, msg)| ScenarioError { line: i + 1, col, msg })?;
        if toks.is_empty() {
            continue;
        }
        let mut c = Cursor::new(toks, line.chars().count());
        parse_line(&mut c, set, &mut sc).map_err(|(col, msg)| ScenarioError { line: i + 1, col, msg })?;
    }
    Ok(sc)
}

type SRes<T> = Result<T, (usize, String)>;

fn want(c: &Cursor, what: &str) -> (usize, String) {
    (c.col(), format!("expected {what}, found {}", c.describe_next()))
}

fn parse_line(c: &mut Cursor, set: &RuleSet, sc: &mut Scenario) -> SRes<()> {
    if c.eat_kw("OUTDOOR") {
        if !c.eat_kw("temperature") || !c.eat_sym("=") {
            return Err(want(c, "`temperature =`"));
        }
        let v = c.num().ok_or_else(|| want(c, "number"))?;
        crate::lex::skip_value_unit(c);
        sc.outdoor_temperature = Some(v.round() as i32);
    } else {
        let pin = if c.eat_kw("PIN") {
            true
        } else if c.eat_kw("INIT") {
            false
        } else {
            return Err(want(c, "INIT, PIN or OUTDOOR"));
        };
        let col = c.col();
        let name = c.ident().ok_or_else(|| want(c, "attribute"))?;
        let attr = resolve_name(set, &name).ok_or((col, format!("undeclared attribute `{name}`")))?;
        let decl = set.decl(&attr).unwrap();
        if c.eat_sym("=") {
            let v = parse_value(c, decl).map_err(|(col, k)| (col, k.to_string()))?;
            sc.init.retain(|(a, _)| a != &attr);
            sc.init.push((attr.clone(), v));
        } else if !pin {
            return Err(want(c, "`=`"));
        }
        if pin && !sc.pinned.contains(&attr) {
            sc.pinned.push(attr);
        }
    }
    if !c.at_end() {
        return Err(want(c, "end of line"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rule::parse_rules;

    #[test]
    fn init_pin_outdoor() {
        let set =
            parse_rules("ATTR home.presence {present,not_present} ENV\nATTR room.temperature [0..40] C TARDY").unwrap();
        let sc = parse_scenario(
            "INIT temperature = 17\nPIN presence = present\nOUTDOOR temperature = 10C",
            &set,
        )
        .unwrap();
        assert_eq!(
            sc.initial_value(&AttributeId::new("room", "temperature")),
            Some(&Value::Int(17))
        );
        assert!(sc.is_pinned(&AttributeId::new("home", "presence")));
        assert_eq!(sc.outdoor_temperature, Some(10));
        let e = parse_scenario("INIT temperature = 99", &set).unwrap_err();
        assert_eq!((e.line, e.col), (1, 20));
        assert!(parse_scenario("INIT lamp = on", &set).is_err());
    }
}
