//! Ordering of properties for repair: scenario rank of the pre-condition,
//! then device rank of the post-condition, then a seeded shuffle.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Property;
use crate::lex::{lex_line, Cursor, Tok};
use crate::rule::{AttributeId, Op, Value};

const DEFAULT_PRIORITIES: &str = include_str!("../../data/priority.cfg");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PriorityKey {
    pub pre: u32,
    pub post: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PriorityTable {
    /// `(attr, value)`; a missing value matches any constraint on the attribute.
    pub pre: Vec<(AttributeId, Option<Value>, u32)>,
    pub post: Vec<(AttributeId, Value, u32)>,
}

impl PriorityTable {
    pub fn builtin() -> Self {
        load_priority_table(DEFAULT_PRIORITIES).expect("built-in priority table parses")
    }

    fn pre_rank(&self, p: &Property) -> Option<u32> {
        p.pre
            .iter()
            .flat_map(|a| a.constraints())
            .filter_map(|(c, _)| {
                let exact = self
                    .pre
                    .iter()
                    .find(|(a, v, _)| *a == c.attr && c.op == Op::Eq && v.as_ref() == Some(&c.value));
                let any = self.pre.iter().find(|(a, v, _)| *a == c.attr && v.is_none());
                exact.or(any).map(|e| e.2)
            })
            .min()
    }

    fn post_rank(&self, p: &Property) -> Option<u32> {
        p.desired_assignments()
            .iter()
            .filter_map(|(a, v)| self.post.iter().find(|(x, y, _)| x == a && y == v).map(|e| e.2))
            .min()
    }

    /// Missing entries rank after everything else.
    pub fn key(&self, p: &Property) -> PriorityKey {
        let pre = self.pre_rank(p).unwrap_or_else(|| {
            log::warn!("no pre-condition priority for {}; ranking it last", p.id);
            u32::MAX
        });
        let post = self.post_rank(p).unwrap_or_else(|| {
            log::warn!("no post-condition priority for {}; ranking it last", p.id);
            u32::MAX
        });
        PriorityKey { pre, post }
    }
}

pub fn load_priority_table(text: &str) -> Result<PriorityTable, String> {
    let mut t = PriorityTable::default();
    for (i, line) in text.lines().enumerate() {
        let err = |m: &str| format!("priority table line {}: {m}", i + 1);
        let toks = lex_line(line).map_err(|(_, m)| err(&m))?;
        if toks.is_empty() {
            continue;
        }
        let mut c = Cursor::new(toks, line.len());
        let is_pre = if c.eat_kw("PRE") {
            true
        } else if c.eat_kw("POST") {
            false
        } else {
            return Err(err("expected PRE or POST"));
        };
        let attr = c
            .ident()
            .and_then(|s| AttributeId::parse(&s))
            .ok_or_else(|| err("expected entity.capability"))?;
        let value = if c.eat_sym("=") {
            Some(match c.next() {
                Some(Tok::Ident(s)) => Value::Label(s),
                Some(Tok::Num(n)) => Value::Int(n.round() as i32),
                _ => return Err(err("expected value")),
            })
        } else {
            None
        };
        let rank = c.num().ok_or_else(|| err("expected rank"))?;
        if rank < 0.0 || !c.at_end() {
            return Err(err("expected a non-negative rank at end of line"));
        }
        let rank = rank as u32;
        if is_pre {
            t.pre.push((attr, value, rank));
        } else {
            t.post
                .push((attr, value.ok_or_else(|| err("POST needs a value"))?, rank));
        }
    }
    Ok(t)
}

/// Stable sort by priority key after a seeded shuffle, so equal keys come
/// out in an order fixed by the seed.
pub fn prioritize(props: &[Property], table: &PriorityTable, seed: u64) -> Vec<Property> {
    let mut v: Vec<(PriorityKey, Property)> = props.iter().map(|p| (table.key(p), p.clone())).collect();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v.sort_by_key(|(k, _)| *k);
    v.into_iter().map(|(_, p)| p).collect()
}
