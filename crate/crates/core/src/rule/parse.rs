//! Parser for the rule file format.
//!
//! ```text
//! ATTR home.presence {present,not_present} ENV
//! ATTR room.temperature [0..40] C TARDY SENSOR 600
//! ATTR room.heater {on,off}
//! r1: IF temperature < 16 WHILE presence = present THEN heater = on
//! IF presence = present THEN heater = on FOR 15min UNTIL temperature > 22
//! ```

use thiserror::Error;

use super::*;
use crate::lex::{duration, lex_line, skip_value_unit, Cursor, Tok};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("undeclared attribute `{0}`")]
    UndeclaredAttribute(String),
    #[error("value `{value}` is outside the domain of {attr}")]
    ValueOutsideDomain { attr: String, value: String },
    #[error("duplicate rule id `{0}`")]
    DuplicateRuleId(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

type Res<T> = Result<T, (usize, ParseErrorKind)>;

fn syntax(c: &Cursor, what: &str) -> (usize, ParseErrorKind) {
    (
        c.col(),
        ParseErrorKind::Syntax(format!("expected {what}, found {}", c.describe_next())),
    )
}

pub fn parse_rules(text: &str) -> Result<RuleSet, ParseError> {
    let mut set = RuleSet::default();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let toks = lex_line(line).map_err(|(col, msg)| ParseError {
            line: lineno,
            col,
            kind: ParseErrorKind::Syntax(msg),
        })?;
        if toks.is_empty() {
            continue;
        }
        let mut c = Cursor::new(toks, line.chars().count());
        let res = if c.eat_kw("ATTR") {
            parse_decl(&mut c, &set).map(|d| set.attrs.push(d))
        } else {
            parse_rule(&mut c, &set).map(|r| set.rules.push(r))
        };
        res.map_err(|(col, kind)| ParseError {
            line: lineno,
            col,
            kind,
        })?;
    }
    Ok(set)
}

fn parse_decl(c: &mut Cursor, set: &RuleSet) -> Res<AttributeDecl> {
    let col = c.col();
    let name = c.ident().ok_or_else(|| syntax(c, "attribute name"))?;
    let id = AttributeId::parse(&name).ok_or((
        col,
        ParseErrorKind::Syntax(format!("attribute `{name}` must be written entity.capability")),
    ))?;
    if set.decl(&id).is_some() {
        return Err((col, ParseErrorKind::Invalid(format!("attribute {id} declared twice"))));
    }
    let domain = if c.eat_sym("{") {
        let mut labels = Vec::new();
        loop {
            let l = c.ident().ok_or_else(|| syntax(c, "label"))?;
            if labels.contains(&l) {
                return Err((c.col(), ParseErrorKind::Invalid(format!("label `{l}` repeated"))));
            }
            labels.push(l);
            if c.eat_sym("}") {
                break;
            }
            if !c.eat_sym(",") {
                return Err(syntax(c, "`,` or `}`"));
            }
        }
        if labels.len() < 2 {
            return Err((col, ParseErrorKind::Invalid("an enumeration needs two labels".into())));
        }
        Domain::Enum(labels)
    } else if c.eat_sym("[") {
        let min = c.num().ok_or_else(|| syntax(c, "number"))?.round() as i32;
        if !c.eat_sym("..") {
            return Err(syntax(c, "`..`"));
        }
        let max = c.num().ok_or_else(|| syntax(c, "number"))?.round() as i32;
        if !c.eat_sym("]") {
            return Err(syntax(c, "`]`"));
        }
        if min > max {
            return Err((col, ParseErrorKind::Invalid("empty range".into())));
        }
        let unit = if c.eat_sym("%") {
            "%".to_string()
        } else if c.is_kw("TARDY") || c.is_kw("ENV") || c.is_kw("SENSOR") {
            String::new()
        } else {
            c.ident().unwrap_or_default()
        };
        Domain::Range { min, max, unit }
    } else {
        return Err(syntax(c, "`{` or `[`"));
    };
    let mut kind = AttrKind::Immediate;
    let mut controllable = true;
    let mut sensor = None;
    while !c.at_end() {
        if c.eat_kw("TARDY") {
            kind = AttrKind::Tardy;
            controllable = false;
        } else if c.eat_kw("ENV") {
            controllable = false;
        } else if c.eat_kw("SENSOR") {
            let s = duration(c).ok_or_else(|| syntax(c, "sensor interval"))?;
            if s == 0 {
                return Err((
                    c.col(),
                    ParseErrorKind::Invalid("sensor interval must be positive".into()),
                ));
            }
            sensor = Some(s);
        } else {
            return Err(syntax(c, "TARDY, ENV, SENSOR or end of line"));
        }
    }
    Ok(AttributeDecl {
        id,
        kind,
        domain,
        controllable,
        sensor_interval_sec: sensor,
    })
}

/// Resolves `entity.capability`, or a bare name when exactly one declared
/// attribute has it as entity (or, failing that, as capability).
fn resolve(c: &mut Cursor, set: &RuleSet) -> Res<AttributeId> {
    let col = c.col();
    let name = c.ident().ok_or_else(|| syntax(c, "attribute"))?;
    resolve_name(set, &name).ok_or((col, ParseErrorKind::UndeclaredAttribute(name)))
}

/// Name lookup used by every file that refers to declared attributes.
pub fn resolve_name(set: &RuleSet, name: &str) -> Option<AttributeId> {
    match AttributeId::parse(name) {
        Some(id) => set.decl(&id).map(|d| d.id.clone()),
        None => {
            let unique = |hits: Vec<&AttributeDecl>| match hits.as_slice() {
                [d] => Some(d.id.clone()),
                _ => None,
            };
            unique(set.attrs.iter().filter(|d| d.id.entity == name).collect())
                .or_else(|| unique(set.attrs.iter().filter(|d| d.id.capability == name).collect()))
        }
    }
}

pub(crate) fn parse_value(c: &mut Cursor, decl: &AttributeDecl) -> Res<Value> {
    let col = c.col();
    let v = match (&decl.domain, c.peek()) {
        (Domain::Enum(_), Some(Tok::Ident(_))) => Value::Label(c.ident().unwrap()),
        (Domain::Range { .. }, Some(Tok::Num(_))) => {
            let n = c.num().unwrap();
            skip_value_unit(c);
            Value::Int(n.round() as i32)
        }
        (_, Some(Tok::Ident(_) | Tok::Num(_))) => {
            let shown = c.next().map(|t| match t {
                Tok::Ident(s) => s,
                Tok::Num(n) => n.to_string(),
                Tok::Sym(s) => s.to_string(),
            });
            return Err((
                col,
                ParseErrorKind::ValueOutsideDomain {
                    attr: decl.id.to_string(),
                    value: shown.unwrap_or_default(),
                },
            ));
        }
        _ => return Err(syntax(c, "value")),
    };
    if !decl.domain.contains(&v) {
        return Err((
            col,
            ParseErrorKind::ValueOutsideDomain {
                attr: decl.id.to_string(),
                value: v.to_string(),
            },
        ));
    }
    Ok(v)
}

fn parse_op(c: &mut Cursor) -> Res<Op> {
    for (s, op) in [
        ("!=", Op::Neq),
        ("<=", Op::Leq),
        (">=", Op::Geq),
        ("=", Op::Eq),
        ("<", Op::Lt),
        (">", Op::Gt),
    ] {
        if c.eat_sym(s) {
            return Ok(op);
        }
    }
    Err(syntax(c, "comparison operator"))
}

pub(crate) fn parse_constraint_in(c: &mut Cursor, set: &RuleSet) -> Res<Constraint> {
    let attr = resolve(c, set)?;
    let decl = set.decl(&attr).unwrap();
    let op_col = c.col();
    let op = parse_op(c)?;
    if op.is_ordering() && !decl.domain.is_numeric() {
        return Err((
            op_col,
            ParseErrorKind::Invalid(format!("`{}` needs a numeric attribute, {attr} is not", op.symbol())),
        ));
    }
    let value = parse_value(c, decl)?;
    Ok(Constraint::new(attr, op, value))
}

fn parse_assignment(c: &mut Cursor, set: &RuleSet) -> Res<Assignment> {
    let col = c.col();
    let attr = resolve(c, set)?;
    let decl = set.decl(&attr).unwrap();
    if !decl.controllable {
        return Err((
            col,
            ParseErrorKind::Invalid(format!("{attr} cannot be set by a device")),
        ));
    }
    if !c.eat_sym("=") {
        return Err(syntax(c, "`=`"));
    }
    let v = parse_value(c, decl)?;
    Ok((attr, v))
}

fn parse_rule(c: &mut Cursor, set: &RuleSet) -> Res<TapRule> {
    let id_col = c.col();
    let save = c.save();
    let id = match c.ident() {
        Some(name) if c.eat_sym(":") => name,
        _ => {
            c.restore(save);
            format!("r{}", set.rules.len() + 1)
        }
    };
    if set.rule(&id).is_some() {
        return Err((id_col, ParseErrorKind::DuplicateRuleId(id)));
    }
    if !c.eat_kw("IF") {
        return Err(syntax(c, "IF"));
    }
    let trigger = parse_constraint_in(c, set)?;
    let mut conditions = Vec::new();
    if c.eat_kw("WHILE") {
        conditions.push(parse_constraint_in(c, set)?);
        while c.eat_kw("AND") {
            conditions.push(parse_constraint_in(c, set)?);
        }
    }
    if !c.eat_kw("THEN") {
        return Err(syntax(c, "THEN"));
    }
    let mut assignments = vec![parse_assignment(c, set)?];
    while c.eat_kw("AND") {
        assignments.push(parse_assignment(c, set)?);
    }
    let mut dur = None;
    let mut delay = None;
    let mut wait = None;
    while !c.at_end() {
        let col = c.col();
        if c.eat_kw("FOR") && dur.is_none() {
            dur = Some(duration(c).ok_or_else(|| syntax(c, "duration"))?);
        } else if c.eat_kw("AFTER") && delay.is_none() {
            delay = Some(duration(c).ok_or_else(|| syntax(c, "duration"))?);
        } else if c.eat_kw("UNTIL") && wait.is_none() {
            wait = Some(parse_constraint_in(c, set)?);
        } else {
            return Err((
                col,
                ParseErrorKind::Syntax(format!(
                    "expected FOR, AFTER, UNTIL or end of line, found {}",
                    c.describe_next()
                )),
            ));
        }
    }
    let extended = dur.is_some() || wait.is_some();
    let completion = if extended {
        let mut comp = Vec::new();
        for (a, v) in &assignments {
            let d = set.decl(a).unwrap();
            match d.domain.complement(v) {
                Some(cv) => comp.push((a.clone(), cv)),
                None => {
                    return Err((
                        id_col,
                        ParseErrorKind::Invalid(format!("extended action on {a} needs a two-label attribute")),
                    ))
                }
            }
        }
        Some(comp)
    } else {
        None
    };
    let mut attrs_set: Vec<&AttributeId> = assignments.iter().map(|(a, _)| a).collect();
    attrs_set.sort();
    attrs_set.dedup();
    if attrs_set.len() != assignments.len() {
        return Err((id_col, ParseErrorKind::Invalid("attribute assigned twice".into())));
    }
    Ok(TapRule {
        id,
        trigger: Trigger { constraint: trigger },
        conditions,
        action: Action {
            assignments,
            kind: if extended {
                ActionKind::Extended
            } else {
                ActionKind::Immediate
            },
            duration_sec: dur,
            completion,
        },
        delay_sec: delay,
        wait_trigger: wait,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str = "ATTR home.presence {present,not_present} ENV\n\
                        ATTR room.temperature [0..40] C TARDY SENSOR 600\n\
                        ATTR room.heater {on,off}\n";

    #[test]
    fn bare_entity_and_auto_ids() {
        let set = parse_rules(&format!(
            "{HEAD}IF temperature < 16 WHILE presence = present THEN heater = on\n\
             IF room.temperature > 24.4 C THEN heater = off FOR 15min"
        ))
        .unwrap();
        assert_eq!(set.rules[0].id, "r1");
        assert_eq!(set.rules[1].id, "r2");
        assert_eq!(set.rules[1].trigger.constraint.value, Value::Int(24));
        assert!(set.rules[1].is_extended());
        assert_eq!(
            set.rules[1].action.completion,
            Some(vec![(AttributeId::new("room", "heater"), Value::Label("on".into()))])
        );
    }

    #[test]
    fn error_positions() {
        let e = parse_rules(&format!("{HEAD}IF room.temperature < 60 THEN heater = on")).unwrap_err();
        assert_eq!(e.line, 4);
        assert_eq!(e.col, 23);
        assert!(matches!(e.kind, ParseErrorKind::ValueOutsideDomain { .. }));

        let e = parse_rules(&format!("{HEAD}IF lamp.switch = on THEN heater = on")).unwrap_err();
        assert_eq!((e.line, e.col), (4, 4));
        assert!(matches!(e.kind, ParseErrorKind::UndeclaredAttribute(_)));

        let e = parse_rules(&format!("{HEAD}IF presence = present THEN presence = not_present")).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Invalid(_)));

        let e = parse_rules(&format!("{HEAD}IF presence > present THEN heater = on")).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Invalid(_)));

        let e = parse_rules(&format!(
            "{HEAD}a: IF presence = present THEN heater = on\na: IF presence = present THEN heater = off"
        ))
        .unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DuplicateRuleId("a".into()));

        let e = parse_rules(&format!("{HEAD}IF presence = present heater = on")).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
    }

    #[test]
    fn printed_form_round_trips() {
        let set = parse_rules(&format!(
            "{HEAD}x: IF presence = present THEN heater = on AFTER 10min\n\
             IF temperature >= 20 THEN heater = off FOR 1h UNTIL temperature < 18"
        ))
        .unwrap();
        assert_eq!(parse_rules(&set.to_dsl()).unwrap(), set);
        set.validate().unwrap();
    }
}
