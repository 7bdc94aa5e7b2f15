//! Correctness properties: atoms, the two normal forms, negation, the
//! property file format, the built-in catalog and priority ordering.

mod priority;
mod template;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use priority::{load_priority_table, prioritize, PriorityKey, PriorityTable};
pub use template::{eval_property_on_trace, eval_template_on_trace, normalize, Template, Trace};

use crate::lex::{duration, lex_line, skip_value_unit, Cursor, Tok};
use crate::rule::{AttributeId, Constraint, Domain, Op, RuleSet, Value};

const CATALOG: &str = include_str!("../../data/catalog.props");

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Atom {
    True,
    State(Constraint),
    /// The constraint became true since the last settled state.
    Event(Constraint),
    /// An extended action assigning `attr = value` is running and has been
    /// running for at most `max_elapsed_sec`.
    ActiveWithin {
        attr: AttributeId,
        value: Value,
        max_elapsed_sec: u32,
    },
    Not(Box<Atom>),
    And(Vec<Atom>),
}

impl Atom {
    pub fn negated(&self) -> Atom {
        match self {
            Atom::State(c) => Atom::State(c.negated()),
            Atom::Not(inner) => (**inner).clone(),
            other => Atom::Not(Box::new(other.clone())),
        }
    }

    /// Constraints read by the atom, with a flag telling event reads apart.
    pub fn constraints(&self) -> Vec<(&Constraint, bool)> {
        match self {
            Atom::True | Atom::ActiveWithin { .. } => vec![],
            Atom::State(c) => vec![(c, false)],
            Atom::Event(c) => vec![(c, true)],
            Atom::Not(a) => a.constraints(),
            Atom::And(v) => v.iter().flat_map(|a| a.constraints()).collect(),
        }
    }

    pub fn attributes(&self) -> Vec<AttributeId> {
        let mut v: Vec<AttributeId> = self.constraints().iter().map(|(c, _)| c.attr.clone()).collect();
        self.collect_active(&mut |a, _, _| v.push(a.clone()));
        v
    }

    fn collect_active(&self, f: &mut dyn FnMut(&AttributeId, &Value, u32)) {
        match self {
            Atom::ActiveWithin {
                attr,
                value,
                max_elapsed_sec,
            } => f(attr, value, *max_elapsed_sec),
            Atom::Not(a) => a.collect_active(f),
            Atom::And(v) => v.iter().for_each(|a| a.collect_active(f)),
            _ => {}
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::True => f.write_str("TRUE"),
            Atom::State(c) => write!(f, "{c}"),
            Atom::Event(c) => write!(f, "@{c}"),
            Atom::ActiveWithin {
                attr,
                value,
                max_elapsed_sec,
            } => write!(f, "running({attr} = {value}) <= {max_elapsed_sec}s"),
            Atom::Not(a) => write!(f, "NOT {a}"),
            Atom::And(v) => {
                for (i, a) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" AND ")?;
                    }
                    write!(f, "{a}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shape {
    /// G(pre => X post)
    Event,
    /// G(pre => post)
    State,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Property {
    pub id: String,
    pub shape: Shape,
    /// Conjunction; empty means true.
    pub pre: Vec<Atom>,
    pub post: Atom,
    pub permitted_latency_sec: Option<u32>,
    pub tags: Vec<String>,
}

/// Same shape as a property, with the post-condition negated.
pub type NegatedProperty = Property;

pub fn negate(p: &Property) -> NegatedProperty {
    Property {
        post: p.post.negated(),
        ..p.clone()
    }
}

impl Property {
    pub fn attributes(&self) -> Vec<AttributeId> {
        let mut v: Vec<AttributeId> = self
            .pre
            .iter()
            .chain(std::iter::once(&self.post))
            .flat_map(|a| a.attributes())
            .collect();
        v.sort();
        v.dedup();
        v
    }

    /// Attributes read through `@` atoms.
    pub fn event_attributes(&self) -> Vec<AttributeId> {
        let mut v: Vec<AttributeId> = self
            .pre
            .iter()
            .chain(std::iter::once(&self.post))
            .flat_map(|a| a.constraints())
            .filter(|(_, ev)| *ev)
            .map(|(c, _)| c.attr.clone())
            .collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn constraints(&self) -> Vec<&Constraint> {
        self.pre
            .iter()
            .chain(std::iter::once(&self.post))
            .flat_map(|a| a.constraints())
            .map(|(c, _)| c)
            .collect()
    }

    /// `(attr, value, max_elapsed_sec)` of every running-action atom.
    pub fn active_within(&self) -> Vec<(AttributeId, Value, u32)> {
        let mut v = Vec::new();
        for a in self.pre.iter().chain(std::iter::once(&self.post)) {
            a.collect_active(&mut |a, val, s| v.push((a.clone(), val.clone(), s)));
        }
        v
    }

    /// The device state the property asks for, when the post is a single
    /// equality (possibly under a conjunction).
    pub fn desired_assignments(&self) -> Vec<(AttributeId, Value)> {
        fn walk(a: &Atom, out: &mut Vec<(AttributeId, Value)>) {
            match a {
                Atom::State(c) | Atom::Event(c) if c.op == Op::Eq => out.push((c.attr.clone(), c.value.clone())),
                Atom::And(v) => v.iter().for_each(|x| walk(x, out)),
                _ => {}
            }
        }
        let mut out = Vec::new();
        walk(&self.post, &mut out);
        out
    }

    /// True when every attribute is declared in `set` and each constant fits
    /// its domain.
    pub fn applies_to(&self, set: &RuleSet) -> bool {
        self.check_against(set).is_ok()
    }

    pub fn check_against(&self, set: &RuleSet) -> Result<(), String> {
        for c in self.constraints() {
            let d = set.decl(&c.attr).ok_or_else(|| format!("{} is not declared", c.attr))?;
            if c.op.is_ordering() && !d.domain.is_numeric() {
                return Err(format!("ordering comparison on {}", c.attr));
            }
            let fits = match (&d.domain, &c.value) {
                (Domain::Enum(_), Value::Label(_)) => d.domain.contains(&c.value),
                (Domain::Range { .. }, Value::Int(_)) => true,
                _ => false,
            };
            if !fits {
                return Err(format!("`{}` does not fit {}", c.value, c.attr));
            }
        }
        for (a, v, _) in self.active_within() {
            let d = set.decl(&a).ok_or_else(|| format!("{a} is not declared"))?;
            if !d.domain.contains(&v) {
                return Err(format!("`{v}` does not fit {a}"));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shape = match self.shape {
            Shape::Event => "EVENT",
            Shape::State => "STATE",
        };
        write!(f, "PROP {} {} WHEN ", self.id, shape)?;
        let pre: Vec<&Atom> = self
            .pre
            .iter()
            .filter(|a| !matches!(a, Atom::ActiveWithin { .. }))
            .collect();
        if pre.is_empty() {
            f.write_str("TRUE")?;
        }
        for (i, a) in pre.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, " THEN {}", self.post)?;
        if let Some(l) = self.permitted_latency_sec {
            write!(f, " WITHIN {l}s")?;
        }
        if !self.tags.is_empty() {
            write!(f, " TAGS {}", self.tags.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("property file line {line}, column {col}: {msg}")]
pub struct PropertyError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

/// Parses a property file:
///
/// ```text
/// PROP P.22 EVENT WHEN presence.state = not_present THEN heater.switch = off TAGS G2,G13
/// PROP P.34 STATE WHEN co2.level = high THEN fan.switch = on WITHIN 10min
/// ```
pub fn parse_properties(text: &str) -> Result<Vec<Property>, PropertyError> {
    let mut out: Vec<Property> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let toks = lex_line(line).map_err(|(col, msg)| PropertyError { line: i + 1, col, msg })?;
        if toks.is_empty() {
            continue;
        }
        let mut c = Cursor::new(toks, line.chars().count());
        let p = parse_one(&mut c).map_err(|(col, msg)| PropertyError { line: i + 1, col, msg })?;
        if out.iter().any(|q| q.id == p.id) {
            return Err(PropertyError {
                line: i + 1,
                col: 1,
                msg: format!("duplicate property id `{}`", p.id),
            });
        }
        out.push(p);
    }
    Ok(out)
}

type PRes<T> = Result<T, (usize, String)>;

fn want(c: &Cursor, what: &str) -> (usize, String) {
    (c.col(), format!("expected {what}, found {}", c.describe_next()))
}

fn parse_one(c: &mut Cursor) -> PRes<Property> {
    if !c.eat_kw("PROP") {
        return Err(want(c, "PROP"));
    }
    let id = c.ident().ok_or_else(|| want(c, "property id"))?;
    let shape = if c.eat_kw("STATE") {
        Shape::State
    } else if c.eat_kw("EVENT") {
        Shape::Event
    } else {
        return Err(want(c, "STATE or EVENT"));
    };
    if !c.eat_kw("WHEN") {
        return Err(want(c, "WHEN"));
    }
    let mut pre = Vec::new();
    loop {
        let a = parse_atom(c)?;
        if a != Atom::True {
            pre.push(a);
        }
        if !c.eat_kw("AND") {
            break;
        }
    }
    if !c.eat_kw("THEN") {
        return Err(want(c, "THEN"));
    }
    let mut posts = vec![parse_atom(c)?];
    while c.eat_kw("AND") {
        posts.push(parse_atom(c)?);
    }
    let post = if posts.len() == 1 {
        posts.pop().unwrap()
    } else {
        Atom::And(posts)
    };
    let mut latency = None;
    let mut tags = Vec::new();
    while !c.at_end() {
        if c.eat_kw("WITHIN") {
            let col = c.col();
            let d = duration(c).ok_or_else(|| want(c, "duration"))?;
            let (attr, value) = match &post {
                Atom::State(k) if k.op == Op::Eq => (k.attr.clone(), k.value.clone()),
                _ => return Err((col, "WITHIN needs a post of the form attr = value".into())),
            };
            latency = Some(d);
            pre.push(Atom::ActiveWithin {
                attr,
                value,
                max_elapsed_sec: d,
            });
        } else if c.eat_kw("TAGS") {
            loop {
                tags.push(c.ident().ok_or_else(|| want(c, "tag"))?);
                if !c.eat_sym(",") {
                    break;
                }
            }
        } else {
            return Err(want(c, "WITHIN, TAGS or end of line"));
        }
    }
    Ok(Property {
        id,
        shape,
        pre,
        post,
        permitted_latency_sec: latency,
        tags,
    })
}

fn parse_atom(c: &mut Cursor) -> PRes<Atom> {
    if c.eat_kw("TRUE") {
        return Ok(Atom::True);
    }
    if c.eat_kw("NOT") {
        return Ok(parse_atom(c)?.negated());
    }
    if c.eat_sym("@") {
        return Ok(Atom::Event(parse_constraint(c)?));
    }
    Ok(Atom::State(parse_constraint(c)?))
}

/// Parses `entity.capability <op> value` without declarations; values are
/// labels or integers by token type.
pub(crate) fn parse_constraint(c: &mut Cursor) -> PRes<Constraint> {
    let col = c.col();
    let name = c.ident().ok_or_else(|| want(c, "attribute"))?;
    let attr =
        AttributeId::parse(&name).ok_or((col, format!("attribute `{name}` must be written entity.capability")))?;
    let op = [
        ("!=", Op::Neq),
        ("<=", Op::Leq),
        (">=", Op::Geq),
        ("=", Op::Eq),
        ("<", Op::Lt),
        (">", Op::Gt),
    ]
    .into_iter()
    .find(|(s, _)| c.eat_sym(s))
    .map(|(_, op)| op)
    .ok_or_else(|| want(c, "comparison operator"))?;
    let value = match c.peek() {
        Some(Tok::Ident(_)) => Value::Label(c.ident().unwrap()),
        Some(Tok::Num(_)) => {
            let n = c.num().unwrap();
            skip_value_unit(c);
            Value::Int(n.round() as i32)
        }
        _ => return Err(want(c, "value")),
    };
    Ok(Constraint::new(attr, op, value))
}

/// The shipped catalog of 53 properties with scenario (G1-G7) and priority
/// (G8-G23) group tags.
pub fn load_catalog() -> Vec<Property> {
    parse_properties(CATALOG).expect("built-in catalog parses")
}

/// Selects properties by id or group tag, keeping catalog order.
pub fn select<'a>(props: &'a [Property], keys: &[String]) -> Vec<&'a Property> {
    props
        .iter()
        .filter(|p| keys.iter().any(|k| &p.id == k || p.tags.contains(k)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_shape() {
        let cat = load_catalog();
        assert_eq!(cat.len(), 53);
        for (i, p) in cat.iter().enumerate() {
            assert_eq!(p.id, format!("P.{}", i + 1));
            let scen = p
                .tags
                .iter()
                .filter(|t| t[1..].parse::<u32>().is_ok_and(|n| (1..=7).contains(&n)));
            assert_eq!(scen.count(), 1, "{}", p.id);
        }
    }

    #[test]
    fn within_becomes_running_atom() {
        let p = &parse_properties("PROP x STATE WHEN co2.level = high THEN fan.switch = on WITHIN 10min").unwrap()[0];
        assert_eq!(p.permitted_latency_sec, Some(600));
        assert_eq!(p.active_within().len(), 1);
        assert_eq!(p.active_within()[0].2, 600);
    }

    #[test]
    fn negation_flips_post_only() {
        let p =
            &parse_properties("PROP q EVENT WHEN presence.state = not_present THEN heater.switch = off").unwrap()[0];
        let n = negate(p);
        assert_eq!(n.pre, p.pre);
        assert_eq!(
            n.post,
            Atom::State(Constraint::new(
                AttributeId::new("heater", "switch"),
                Op::Neq,
                Value::Label("off".into())
            ))
        );
        assert_eq!(negate(&n), *p);
    }

    #[test]
    fn errors_carry_position() {
        let e = parse_properties("PROP a STATE WHEN x.y = 1\nPROP b STATE WHEN x = 1 THEN a.b = c").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_properties("PROP b STATE WHEN x = 1 THEN a.b = c").unwrap_err();
        assert_eq!((e.line, e.col), (1, 19));
    }
}
