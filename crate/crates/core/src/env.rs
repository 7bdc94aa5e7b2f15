//! Physical channels and the effects device actions have on them.

use std::cmp::Ordering;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lex::{lex_line, Cursor, Tok};
use crate::rule::{Assignment, AttributeId, Value};

const DEFAULT_CHANNELS: &str = include_str!("../data/channels.cfg");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Temperature,
    Illuminance,
    Motion,
    Smoke,
    Humidity,
    Co,
    Co2,
    Sound,
    Weather,
}

impl Channel {
    pub const ALL: [Channel; 9] = [
        Channel::Temperature,
        Channel::Illuminance,
        Channel::Motion,
        Channel::Smoke,
        Channel::Humidity,
        Channel::Co,
        Channel::Co2,
        Channel::Sound,
        Channel::Weather,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Temperature => "temperature",
            Channel::Illuminance => "illuminance",
            Channel::Motion => "motion",
            Channel::Smoke => "smoke",
            Channel::Humidity => "humidity",
            Channel::Co => "co",
            Channel::Co2 => "co2",
            Channel::Sound => "sound",
            Channel::Weather => "weather",
        }
    }

    pub fn parse(s: &str) -> Option<Channel> {
        let s = s.to_ascii_lowercase();
        Channel::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Motion and weather are never changed by devices.
    pub fn actuator_affected(self) -> bool {
        !matches!(self, Channel::Motion | Channel::Weather)
    }

    /// The channel an attribute senses, by entity name (`temperature.value`,
    /// `co2.level`, ...).
    pub fn of(attr: &AttributeId) -> Option<Channel> {
        Channel::parse(&attr.entity)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Delta {
    Amount(i32),
    /// Clears a hazard level. Leveled domains list the cleared label first,
    /// so this is one level down.
    Clear,
}

impl Delta {
    pub fn units(self) -> i32 {
        match self {
            Delta::Amount(n) => n,
            Delta::Clear => -1,
        }
    }
}

/// Effect branches that depend on the indoor/outdoor temperature difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EffectCondition {
    OutdoorWarmer,
    OutdoorColder,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EffectContext {
    /// `outdoor.cmp(indoor)`; `None` when no outdoor temperature is known.
    pub outdoor_vs_indoor: Option<Ordering>,
}

impl EffectContext {
    pub fn admits(&self, cond: Option<EffectCondition>) -> bool {
        match cond {
            None => true,
            Some(EffectCondition::OutdoorWarmer) => self.outdoor_vs_indoor == Some(Ordering::Greater),
            Some(EffectCondition::OutdoorColder) => self.outdoor_vs_indoor == Some(Ordering::Less),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EffectSpec {
    pub action: Assignment,
    pub channel: Channel,
    pub delta: Delta,
    /// Seconds per `delta`; `(0, 0)` means the change is applied at once.
    pub interval_sec: (u32, u32),
    pub condition: Option<EffectCondition>,
}

impl EffectSpec {
    pub fn is_immediate(&self) -> bool {
        self.interval_sec.1 == 0
    }

    /// Per-tick change range for this effect alone.
    pub fn per_tick(&self, tick_sec: u32) -> (f64, f64) {
        let d = self.delta.units() as f64;
        if self.is_immediate() {
            return (d, d);
        }
        let (lo, hi) = self.interval_sec;
        let a = d * tick_sec as f64 / hi as f64;
        let b = d * tick_sec as f64 / lo as f64;
        (a.min(b), a.max(b))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChannelTable {
    pub effects: Vec<EffectSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("channel config line {line}: {msg}")]
pub struct ChannelError {
    pub line: usize,
    pub msg: String,
}

impl ChannelTable {
    pub fn builtin() -> ChannelTable {
        load_channel_table(DEFAULT_CHANNELS).expect("built-in channel table parses")
    }

    pub fn lookup(&self, action: &Assignment, channel: Channel) -> Vec<&EffectSpec> {
        self.effects
            .iter()
            .filter(|e| &e.action == action && e.channel == channel)
            .collect()
    }

    /// Channels some action on `attr` affects.
    pub fn channels_of_device(&self, attr: &AttributeId) -> Vec<Channel> {
        let mut v: Vec<Channel> = self
            .effects
            .iter()
            .filter(|e| &e.action.0 == attr)
            .map(|e| e.channel)
            .collect();
        v.sort();
        v.dedup();
        v
    }
}

pub fn load_channel_table(text: &str) -> Result<ChannelTable, ChannelError> {
    let mut table = ChannelTable::default();
    for (i, line) in text.lines().enumerate() {
        let err = |msg: String| ChannelError { line: i + 1, msg };
        let toks = lex_line(line).map_err(|(_, m)| err(m))?;
        if toks.is_empty() {
            continue;
        }
        let mut c = Cursor::new(toks, line.len());
        let spec = parse_effect(&mut c).map_err(err)?;
        let dup = table
            .effects
            .iter()
            .any(|e| e.action == spec.action && e.channel == spec.channel && e.condition == spec.condition);
        if dup {
            return Err(err(format!(
                "second effect of {}={} on {}",
                spec.action.0, spec.action.1, spec.channel
            )));
        }
        table.effects.push(spec);
    }
    Ok(table)
}

fn parse_effect(c: &mut Cursor) -> Result<EffectSpec, String> {
    let expect = |c: &Cursor, what: &str| format!("expected {what}, found {}", c.describe_next());
    if !c.eat_kw("EFFECT") {
        return Err(expect(c, "EFFECT"));
    }
    let attr = c
        .ident()
        .and_then(|s| AttributeId::parse(&s))
        .ok_or_else(|| expect(c, "entity.capability"))?;
    if !c.eat_sym("=") {
        return Err(expect(c, "`=`"));
    }
    let value = match c.next() {
        Some(Tok::Ident(s)) => Value::Label(s),
        Some(Tok::Num(n)) => Value::Int(n.round() as i32),
        _ => return Err("expected action value".into()),
    };
    if !c.eat_sym("->") {
        return Err(expect(c, "`->`"));
    }
    let chan_name = c.ident().ok_or_else(|| expect(c, "channel"))?;
    let channel = Channel::parse(&chan_name).ok_or_else(|| format!("unknown channel `{chan_name}`"))?;
    if !channel.actuator_affected() {
        return Err(format!("devices cannot affect the {channel} channel"));
    }
    let delta = if c.eat_kw("clear") {
        Delta::Clear
    } else {
        let n = c.num().ok_or_else(|| expect(c, "delta"))?;
        crate::lex::skip_value_unit(c);
        Delta::Amount(n.round() as i32)
    };
    if !c.eat_kw("PER") || !c.eat_sym("[") {
        return Err(expect(c, "PER [lo..hi]"));
    }
    let lo = c.num().ok_or_else(|| expect(c, "number"))?;
    if !c.eat_sym("..") {
        return Err(expect(c, "`..`"));
    }
    let hi = c.num().ok_or_else(|| expect(c, "number"))?;
    if !c.eat_sym("]") {
        return Err(expect(c, "`]`"));
    }
    let unit = match c.peek() {
        Some(Tok::Ident(u)) if !u.eq_ignore_ascii_case("IF") => {
            let m = match u.to_ascii_lowercase().as_str() {
                "s" | "sec" => 1.0,
                "min" | "m" => 60.0,
                "h" => 3600.0,
                other => return Err(format!("unknown time unit `{other}`")),
            };
            c.next();
            m
        }
        _ => 1.0,
    };
    if lo < 0.0 || lo > hi {
        return Err(format!("bad interval [{lo}..{hi}]"));
    }
    let interval = ((lo * unit).round() as u32, (hi * unit).round() as u32);
    let immediate_channel = matches!(channel, Channel::Illuminance | Channel::Sound);
    if immediate_channel && interval != (0, 0) {
        return Err(format!("{channel} changes at once; use PER [0..0]s"));
    }
    if !immediate_channel && interval.0 == 0 {
        return Err(format!("{channel} changes over time; interval must be positive"));
    }
    let condition = if c.eat_kw("IF") {
        if !c.eat_kw("outdoor") {
            return Err(expect(c, "outdoor"));
        }
        let cond = if c.eat_sym(">") {
            EffectCondition::OutdoorWarmer
        } else if c.eat_sym("<") {
            EffectCondition::OutdoorColder
        } else {
            return Err(expect(c, "`<` or `>`"));
        };
        if !c.eat_kw("indoor") {
            return Err(expect(c, "indoor"));
        }
        Some(cond)
    } else {
        None
    };
    if !c.at_end() {
        return Err(expect(c, "end of line"));
    }
    Ok(EffectSpec {
        action: (attr, value),
        channel,
        delta,
        interval_sec: interval,
        condition,
    })
}

/// Every effect the action has, across channels.
pub fn implicit_effects(action: &Assignment, table: &ChannelTable) -> Vec<EffectSpec> {
    table.effects.iter().filter(|e| &e.action == action).cloned().collect()
}

/// Summed per-tick change range of `channel` under the active actions.
pub fn joint_effect(
    active: &[Assignment],
    channel: Channel,
    table: &ChannelTable,
    tick_sec: u32,
    ctx: &EffectContext,
) -> (f64, f64) {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for a in active {
        for e in table.lookup(a, channel) {
            if ctx.admits(e.condition) && !e.is_immediate() {
                let (x, y) = e.per_tick(tick_sec);
                lo += x;
                hi += y;
            }
        }
    }
    (lo, hi)
}

/// One concrete per-tick rate inside the joint range: each effect's interval
/// is drawn from its range with the given seed.
pub fn sampled_joint_effect(
    active: &[Assignment],
    channel: Channel,
    table: &ChannelTable,
    tick_sec: u32,
    ctx: &EffectContext,
    seed: u64,
) -> f64 {
    let mut sum = 0.0;
    let mut k = 0u64;
    for a in active {
        for e in table.lookup(a, channel) {
            if ctx.admits(e.condition) && !e.is_immediate() {
                let (lo, hi) = e.interval_sec;
                let secs = sample_nondeterministic(lo as i64, hi as i64, seed.wrapping_add(k));
                sum += e.delta.units() as f64 * tick_sec as f64 / secs as f64;
                k += 1;
            }
        }
    }
    sum
}

/// Uniform draw from `[lo, hi]`, reproducible for a given seed.
pub fn sample_nondeterministic(lo: i64, hi: i64, seed: u64) -> i64 {
    assert!(lo <= hi, "empty range [{lo}, {hi}]");
    ChaCha8Rng::seed_from_u64(seed).gen_range(lo..=hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(e: &str, c: &str, v: &str) -> Assignment {
        (AttributeId::new(e, c), Value::Label(v.into()))
    }

    #[test]
    fn builtin_table_loads() {
        let t = ChannelTable::builtin();
        assert!(t.effects.iter().all(|e| e.channel.actuator_affected()));
        assert_eq!(t.channels_of_device(&AttributeId::new("window", "switch")).len(), 5);
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(load_channel_table("EFFECT fan.switch=on -> motion +1 PER [10..20]s").is_err());
        assert!(load_channel_table("EFFECT fan.switch=on -> co2 -1 PER [20..10]s").is_err());
        assert!(load_channel_table("EFFECT fan.switch=on -> noise -1 PER [10..20]s").is_err());
        assert!(load_channel_table("EFFECT fan.switch=on co2 -1 PER [10..20]s").is_err());
        let e = load_channel_table("\n\nEFFECT light.switch=on -> illuminance +1 PER [5..9]s").unwrap_err();
        assert_eq!(e.line, 3);
    }

    #[test]
    fn minutes_are_accepted() {
        let t = load_channel_table("EFFECT fan.switch=on -> co2 -1 PER [10..15]min").unwrap();
        assert_eq!(t.effects[0].interval_sec, (600, 900));
    }

    #[test]
    fn conditional_branches_need_outdoor() {
        let t = ChannelTable::builtin();
        let w = [act("window", "switch", "open")];
        let none = EffectContext::default();
        assert_eq!(joint_effect(&w, Channel::Temperature, &t, 600, &none), (0.0, 0.0));
        let colder = EffectContext {
            outdoor_vs_indoor: Some(Ordering::Less),
        };
        let (lo, hi) = joint_effect(&w, Channel::Temperature, &t, 600, &colder);
        assert!((lo + 1.0).abs() < 1e-9 && (hi + 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn sampling_degenerate_and_repeatable() {
        assert_eq!(sample_nondeterministic(5, 5, 7), 5);
        assert_eq!(
            sample_nondeterministic(600, 900, 42),
            sample_nondeterministic(600, 900, 42)
        );
    }
}
