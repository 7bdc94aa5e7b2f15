//! Finite automaton over compressed attribute domains, rule timers, sensor
//! mirrors and physical dynamics.
//!
//! A state is a flat vector of small integers. Rule firings, action
//! completions and sensor updates are urgent: while one is pending the state
//! is not settled and time does not advance. Properties are judged at
//! settled states only.

mod relevance;

use std::cmp::Ordering;
use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use relevance::{compress_domains, select_relevant};

use crate::env::{joint_effect, sampled_joint_effect, Channel, ChannelTable, EffectContext};
use crate::props::{Atom, Property};
use crate::rule::{AttributeDecl, AttributeId, Constraint, Op, RuleSet, TapRule, Value};
use crate::scenario::Scenario;

pub type State = Box<[i16]>;

/// Branch periods above this many ticks count as "no change".
const MAX_PERIOD: i32 = 60;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Label {
    RuleFire(String),
    ActionComplete(String),
    EnvChange(AttributeId),
    PhysicalTick,
    SensorUpdate(AttributeId),
    Stutter,
}

impl Label {
    /// Transitions the automation system itself performs.
    pub fn is_controllable(&self) -> bool {
        matches!(self, Label::RuleFire(_) | Label::ActionComplete(_))
    }

    pub fn rule(&self) -> Option<&str> {
        match self {
            Label::RuleFire(r) | Label::ActionComplete(r) => Some(r),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::RuleFire(r) => write!(f, "fire:{r}"),
            Label::ActionComplete(r) => write!(f, "complete:{r}"),
            Label::EnvChange(a) => write!(f, "env:{a}"),
            Label::PhysicalTick => f.write_str("tick"),
            Label::SensorUpdate(a) => write!(f, "sense:{a}"),
            Label::Stutter => f.write_str("stutter"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Role {
    Physical,
    LogicalMirror,
    SensorAge,
    /// Ticks since the tardy attribute last moved.
    Progress,
    /// Logical value at the last settled state.
    Shadow,
    /// -1 idle, 0 ready to fire, k ticks of delay left.
    FireTimer,
    /// -1 idle, else ticks the extended action has been running.
    RunTimer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VariableSpec {
    pub name: String,
    pub attr: Option<AttributeId>,
    pub rule: Option<String>,
    pub role: Role,
    pub lo: i32,
    pub hi: i32,
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub tick_sec: u32,
    pub seed: u64,
    pub state_cap: usize,
    pub compress: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            tick_sec: 60,
            seed: 0,
            state_cap: 1_000_000,
            compress: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("state space exceeds the cap of {0} states")]
    StateCap(usize),
    #[error("unknown state")]
    UnknownState,
}

/// Default sensing delay in seconds when the declaration gives none.
fn default_l3(attr: &AttributeId) -> u32 {
    match attr.entity.as_str() {
        "presence" => 10,
        "temperature" => 600,
        _ => 60,
    }
}

#[derive(Debug, Clone, Copy)]
struct CC {
    slot: usize,
    op: Op,
    rhs: i32,
}

#[derive(Debug, Clone)]
struct Move {
    dir: i16,
    step: i16,
    period: i16,
}

#[derive(Debug, Clone, Default)]
struct Moves {
    cands: Vec<Move>,
    stall: bool,
    max_period: i16,
}

#[derive(Debug, Clone)]
struct Dynamics {
    /// Device slots whose effects reach this attribute.
    devices: Vec<usize>,
    /// Indexed by mixed-radix device code then context (0..4).
    table: Vec<Moves>,
}

#[derive(Debug, Clone)]
struct AttrSlot {
    decl: AttributeDecl,
    lo: i32,
    hi: i32,
    phys: usize,
    mirror: Option<(usize, usize, i16)>,
    progress: Option<usize>,
    dynamics: Option<Dynamics>,
    shadow: Option<usize>,
    pinned: bool,
}

#[derive(Debug, Clone)]
struct RuleSlot {
    rule: TapRule,
    trig: CC,
    conds: Vec<CC>,
    wait: Option<CC>,
    assigns: Vec<(usize, i32)>,
    completion: Vec<(usize, i32)>,
    fire: usize,
    run: Option<usize>,
    delay_ticks: i16,
    dur_ticks: i16,
    run_cap: i16,
}

/// Public view of one modelled attribute.
#[derive(Debug, Clone)]
pub struct AttrInfo<'a> {
    pub decl: &'a AttributeDecl,
    pub lo: i32,
    pub hi: i32,
    pub mirrored: bool,
    pub pinned: bool,
    /// Some device in the model can change it through a physical channel.
    pub effect_target: bool,
}

/// Lazily explored transition system.
#[derive(Debug, Clone)]
pub struct Model {
    pub vars: Vec<VariableSpec>,
    pub tick_sec: u32,
    slots: Vec<AttrSlot>,
    rules: Vec<RuleSlot>,
    table: ChannelTable,
    outdoor: Option<i32>,
    attr_pos: HashMap<AttributeId, usize>,
    initial: Vec<State>,
}

fn ceil_div(a: u32, b: u32) -> i16 {
    a.div_ceil(b).min(i16::MAX as u32) as i16
}

impl Model {
    /// Builds the model for the relevant rules and attributes of `props`.
    pub fn for_properties(
        set: &RuleSet,
        props: &[&Property],
        scenario: &Scenario,
        table: &ChannelTable,
        opts: &BuildOptions,
    ) -> Model {
        let (rules, attrs) = select_relevant(set, props, table);
        let specs = compress_domains(set, &rules, &attrs, props, scenario, table, opts);
        Model::new(set, &rules, &specs, props, scenario, table, opts)
    }

    pub fn new(
        set: &RuleSet,
        rules: &[TapRule],
        specs: &[VariableSpec],
        props: &[&Property],
        scenario: &Scenario,
        table: &ChannelTable,
        opts: &BuildOptions,
    ) -> Model {
        let tick = opts.tick_sec.max(1);
        let mut vars: Vec<VariableSpec> = Vec::new();
        let push = |vars: &mut Vec<VariableSpec>, v: VariableSpec| {
            vars.push(v);
            vars.len() - 1
        };
        let event_attrs: Vec<AttributeId> = props.iter().flat_map(|p| p.event_attributes()).collect();
        let mut slots = Vec::new();
        let mut attr_pos = HashMap::new();
        for spec in specs {
            let attr = spec.attr.clone().expect("physical spec names its attribute");
            let decl = set.decl(&attr).expect("declared").clone();
            let phys = push(&mut vars, spec.clone());
            let l3 = decl.sensor_interval_sec.unwrap_or_else(|| default_l3(&attr));
            let ticks = ceil_div(l3, tick);
            let mirror = (!decl.controllable && ticks >= 2).then(|| {
                let log = push(
                    &mut vars,
                    VariableSpec {
                        name: format!("{attr}.sensed"),
                        role: Role::LogicalMirror,
                        ..spec.clone()
                    },
                );
                let age = push(
                    &mut vars,
                    VariableSpec {
                        name: format!("{attr}.age"),
                        attr: Some(attr.clone()),
                        rule: None,
                        role: Role::SensorAge,
                        lo: 0,
                        hi: ticks as i32,
                    },
                );
                (log, age, ticks)
            });
            let shadow = event_attrs.contains(&attr).then(|| {
                push(
                    &mut vars,
                    VariableSpec {
                        name: format!("{attr}.prev"),
                        role: Role::Shadow,
                        ..spec.clone()
                    },
                )
            });
            attr_pos.insert(attr.clone(), slots.len());
            slots.push(AttrSlot {
                pinned: scenario.is_pinned(&attr),
                decl,
                lo: spec.lo,
                hi: spec.hi,
                phys,
                mirror,
                progress: None,
                dynamics: None,
                shadow,
            });
        }
        // physical dynamics of tardy attributes
        for i in 0..slots.len() {
            if !slots[i].decl.is_tardy() {
                continue;
            }
            let Some(ch) = Channel::of(&slots[i].decl.id) else {
                continue;
            };
            let devices: Vec<usize> = (0..slots.len())
                .filter(|&j| slots[j].decl.controllable && table.channels_of_device(&slots[j].decl.id).contains(&ch))
                .collect();
            if devices.is_empty() {
                continue;
            }
            let dyn_table = dynamics_table(&slots, &devices, ch, table, tick, opts.seed);
            let maxp = dyn_table.iter().map(|m| m.max_period).max().unwrap_or(0);
            if maxp == 0 {
                continue;
            }
            let id = slots[i].decl.id.clone();
            let p = push(
                &mut vars,
                VariableSpec {
                    name: format!("{id}.progress"),
                    attr: Some(id),
                    rule: None,
                    role: Role::Progress,
                    lo: 0,
                    hi: maxp as i32,
                },
            );
            slots[i].progress = Some(p);
            slots[i].dynamics = Some(Dynamics {
                devices,
                table: dyn_table,
            });
        }
        let compile = |c: &Constraint| -> CC {
            let slot = attr_pos[&c.attr];
            let d = &slots[slot].decl.domain;
            let rhs = match (&c.value, d) {
                (Value::Int(n), _) => *n,
                (v, _) => d.encode(v).unwrap_or(-1),
            };
            CC { slot, op: c.op, rhs }
        };
        let encode = |a: &AttributeId, v: &Value| -> (usize, i32) {
            let slot = attr_pos[a];
            (slot, slots[slot].decl.domain.encode(v).unwrap_or(0))
        };
        let mut rslots = Vec::new();
        for r in rules {
            let fire = push(
                &mut vars,
                VariableSpec {
                    name: format!("{}.fire", r.id),
                    attr: None,
                    rule: Some(r.id.clone()),
                    role: Role::FireTimer,
                    lo: -1,
                    hi: ceil_div(r.delay_sec.unwrap_or(0), tick) as i32,
                },
            );
            let dur_ticks = ceil_div(r.action.duration_sec.unwrap_or(0), tick);
            let within = props
                .iter()
                .flat_map(|p| p.active_within())
                .filter(|(a, v, _)| r.action.assignments.iter().any(|(x, y)| x == a && y == v))
                .map(|(_, _, s)| ceil_div(s, tick) + 1)
                .max()
                .unwrap_or(0);
            let run_cap = dur_ticks.max(within);
            let run = r.is_extended().then(|| {
                push(
                    &mut vars,
                    VariableSpec {
                        name: format!("{}.run", r.id),
                        attr: None,
                        rule: Some(r.id.clone()),
                        role: Role::RunTimer,
                        lo: -1,
                        hi: run_cap as i32,
                    },
                )
            });
            rslots.push(RuleSlot {
                trig: compile(&r.trigger.constraint),
                conds: r.conditions.iter().map(compile).collect(),
                wait: r.wait_trigger.as_ref().map(compile),
                assigns: r.action.assignments.iter().map(|(a, v)| encode(a, v)).collect(),
                completion: r
                    .action
                    .completion
                    .iter()
                    .flatten()
                    .map(|(a, v)| encode(a, v))
                    .collect(),
                fire,
                run,
                delay_ticks: ceil_div(r.delay_sec.unwrap_or(0), tick),
                dur_ticks,
                run_cap,
                rule: r.clone(),
            });
        }
        let table = ChannelTable {
            effects: table
                .effects
                .iter()
                .filter(|e| attr_pos.contains_key(&e.action.0))
                .cloned()
                .collect(),
        };
        let mut m = Model {
            vars,
            tick_sec: tick,
            slots,
            rules: rslots,
            table,
            outdoor: scenario.outdoor_temperature,
            attr_pos,
            initial: Vec::new(),
        };
        m.initial = m.make_initial(scenario);
        m
    }

    fn make_initial(&self, scenario: &Scenario) -> Vec<State> {
        let choices: Vec<Vec<i32>> = self
            .slots
            .iter()
            .map(
                |s| match scenario.initial_value(&s.decl.id).and_then(|v| s.decl.domain.encode(v)) {
                    Some(c) => vec![c.clamp(s.lo, s.hi)],
                    None => (s.lo..=s.hi).collect(),
                },
            )
            .collect();
        let mut out = Vec::new();
        let mut idx = vec![0usize; choices.len()];
        loop {
            let mut st = vec![0i16; self.vars.len()];
            for (k, s) in self.slots.iter().enumerate() {
                let v = choices[k][idx[k]] as i16;
                st[s.phys] = v;
                if let Some((log, age, _)) = s.mirror {
                    st[log] = v;
                    st[age] = 0;
                }
                if let Some(p) = s.progress {
                    st[p] = 0;
                }
                if let Some(sh) = s.shadow {
                    st[sh] = v;
                }
            }
            for r in &self.rules {
                st[r.fire] = -1;
                if let Some(run) = r.run {
                    st[run] = -1;
                }
                if self.cc(&st, &r.trig) && r.conds.iter().all(|c| self.cc(&st, c)) {
                    st[r.fire] = r.delay_ticks;
                }
            }
            out.push(st.into_boxed_slice());
            // odometer
            let mut k = 0;
            loop {
                if k == idx.len() {
                    out.sort();
                    out.dedup();
                    return out;
                }
                idx[k] += 1;
                if idx[k] < choices[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    pub fn initial_states(&self) -> &[State] {
        &self.initial
    }

    pub fn rules(&self) -> impl Iterator<Item = &TapRule> {
        self.rules.iter().map(|r| &r.rule)
    }

    pub fn attributes(&self) -> Vec<AttrInfo<'_>> {
        self.slots
            .iter()
            .enumerate()
            .map(|(i, s)| AttrInfo {
                decl: &s.decl,
                lo: s.lo,
                hi: s.hi,
                mirrored: s.mirror.is_some(),
                pinned: s.pinned,
                effect_target: self.slots[i].dynamics.is_some() || self.immediate_target(i),
            })
            .collect()
    }

    fn immediate_target(&self, slot: usize) -> bool {
        let Some(ch) = Channel::of(&self.slots[slot].decl.id) else {
            return false;
        };
        self.table.effects.iter().any(|e| e.channel == ch && e.is_immediate())
    }

    pub fn has_attr(&self, a: &AttributeId) -> bool {
        self.attr_pos.contains_key(a)
    }

    fn logical(&self, s: &[i16], slot: usize) -> i32 {
        let sl = &self.slots[slot];
        match sl.mirror {
            Some((log, _, _)) => s[log] as i32,
            None => s[sl.phys] as i32,
        }
    }

    fn cc(&self, s: &[i16], c: &CC) -> bool {
        c.op.holds(self.logical(s, c.slot), c.rhs)
    }

    /// Logical (sensed) value of an attribute.
    pub fn value(&self, s: &State, a: &AttributeId) -> Option<Value> {
        let i = *self.attr_pos.get(a)?;
        Some(self.slots[i].decl.domain.decode(self.logical(s, i)))
    }

    pub fn physical_value(&self, s: &State, a: &AttributeId) -> Option<Value> {
        let i = *self.attr_pos.get(a)?;
        Some(self.slots[i].decl.domain.decode(s[self.slots[i].phys] as i32))
    }

    fn code_of(&self, slot: usize, v: &Value) -> i32 {
        match v {
            Value::Int(n) => *n,
            v => self.slots[slot].decl.domain.encode(v).unwrap_or(-1),
        }
    }

    /// Constraint on the logical view; false for attributes outside the model.
    pub fn holds(&self, s: &State, c: &Constraint) -> bool {
        match self.attr_pos.get(&c.attr) {
            Some(&i) => c.op.holds(self.logical(s, i), self.code_of(i, &c.value)),
            None => false,
        }
    }

    fn holds_at_shadow(&self, s: &State, c: &Constraint) -> Option<bool> {
        let i = *self.attr_pos.get(&c.attr)?;
        let sh = self.slots[i].shadow?;
        Some(c.op.holds(s[sh] as i32, self.code_of(i, &c.value)))
    }

    pub fn eval_atom(&self, s: &State, a: &Atom) -> bool {
        match a {
            Atom::True => true,
            Atom::State(c) => self.holds(s, c),
            Atom::Event(c) => self.holds(s, c) && self.holds_at_shadow(s, c) == Some(false),
            Atom::ActiveWithin {
                attr,
                value,
                max_elapsed_sec,
            } => self.rules.iter().any(|r| {
                r.rule.action.assignments.iter().any(|(x, y)| x == attr && y == value)
                    && r.run
                        .is_some_and(|run| s[run] >= 0 && s[run] as u32 * self.tick_sec <= *max_elapsed_sec)
            }),
            Atom::Not(x) => !self.eval_atom(s, x),
            Atom::And(v) => v.iter().all(|x| self.eval_atom(s, x)),
        }
    }

    pub fn eval_pre(&self, s: &State, p: &Property) -> bool {
        p.pre.iter().all(|a| self.eval_atom(s, a))
    }

    fn run_ready(&self, s: &[i16], r: &RuleSlot) -> bool {
        match r.run {
            Some(run) => s[run] >= r.dur_ticks && r.wait.as_ref().is_none_or(|w| self.cc(s, w)),
            None => false,
        }
    }

    /// No rule firing, completion or sensor update is pending.
    pub fn is_settled(&self, s: &State) -> bool {
        self.rules.iter().all(|r| s[r.fire] != 0 && !self.run_ready(s, r))
            && self
                .slots
                .iter()
                .all(|sl| sl.mirror.is_none_or(|(_, age, l)| s[age] < l))
    }

    pub fn fire_timer(&self, s: &State, rule: &str) -> Option<i16> {
        self.rules.iter().find(|r| r.rule.id == rule).map(|r| s[r.fire])
    }

    pub fn run_timer(&self, s: &State, rule: &str) -> Option<i16> {
        self.rules
            .iter()
            .find(|r| r.rule.id == rule)
            .and_then(|r| r.run.map(|i| s[i]))
    }

    /// Physical and sensed values of every attribute no device controls.
    pub fn uncontrollable_projection(&self, s: &State) -> Vec<i16> {
        let mut v = Vec::new();
        for sl in self.slots.iter().filter(|sl| !sl.decl.controllable) {
            v.push(s[sl.phys]);
            if let Some((log, _, _)) = sl.mirror {
                v.push(s[log]);
            }
        }
        v
    }

    /// Values of the given attributes (logical view), `None` where absent.
    pub fn project(&self, s: &State, attrs: &[AttributeId]) -> Vec<Option<i32>> {
        attrs
            .iter()
            .map(|a| self.attr_pos.get(a).map(|&i| self.logical(s, i)))
            .collect()
    }

    /// Physical values of the given attributes.
    pub fn project_physical(&self, s: &State, attrs: &[AttributeId]) -> Vec<Option<i32>> {
        attrs
            .iter()
            .map(|a| self.attr_pos.get(a).map(|&i| s[self.slots[i].phys] as i32))
            .collect()
    }

    fn set_value(&self, st: &mut [i16], slot: usize, v: i32) {
        let sl = &self.slots[slot];
        st[sl.phys] = v.clamp(sl.lo, sl.hi) as i16;
        // effects that apply at once (light -> illuminance, window -> sound)
        let value = sl.decl.domain.decode(v);
        for e in self.table.effects.iter().filter(|e| e.is_immediate()) {
            if e.action.0 == sl.decl.id && e.action.1 == value {
                for (j, t) in self.slots.iter().enumerate() {
                    if Channel::of(&t.decl.id) == Some(e.channel) && j != slot {
                        let nv = (st[t.phys] as i32 + e.delta.units()).clamp(t.lo, t.hi);
                        st[t.phys] = nv as i16;
                    }
                }
            }
        }
    }

    fn ctx_index(&self, st: &[i16], slot: usize) -> usize {
        if Channel::of(&self.slots[slot].decl.id) != Some(Channel::Temperature) {
            return 3;
        }
        match self.outdoor {
            None => 3,
            Some(o) => match o.cmp(&(st[self.slots[slot].phys] as i32)) {
                Ordering::Less => 0,
                Ordering::Equal => 1,
                Ordering::Greater => 2,
            },
        }
    }

    fn moves_for(&self, st: &[i16], slot: usize) -> Option<&Moves> {
        let d = self.slots[slot].dynamics.as_ref()?;
        let mut code = 0usize;
        for &dev in &d.devices {
            let sl = &self.slots[dev];
            code = code * (sl.hi - sl.lo + 1) as usize + (st[sl.phys] as i32 - sl.lo) as usize;
        }
        d.table.get(code * 4 + self.ctx_index(st, slot))
    }

    /// Bookkeeping shared by every transition: shadows, progress resets and
    /// trigger edges.
    fn finish(&self, src: &State, mut dst: Vec<i16>, src_settled: bool) -> State {
        if src_settled {
            for (i, sl) in self.slots.iter().enumerate() {
                if let Some(sh) = sl.shadow {
                    dst[sh] = self.logical(src, i) as i16;
                }
            }
        }
        for sl in &self.slots {
            if let (Some(p), Some(d)) = (sl.progress, &sl.dynamics) {
                if d.devices
                    .iter()
                    .any(|&dev| src[self.slots[dev].phys] != dst[self.slots[dev].phys])
                {
                    dst[p] = 0;
                }
            }
        }
        for r in &self.rules {
            if dst[r.fire] == -1
                && src[r.fire] == -1
                && !self.cc(src, &r.trig)
                && self.cc(&dst, &r.trig)
                && r.conds.iter().all(|c| self.cc(&dst, c))
            {
                dst[r.fire] = r.delay_ticks;
            }
        }
        dst.into_boxed_slice()
    }

    /// All successors, sorted by label then target.
    pub fn successors(&self, s: &State) -> Vec<(Label, State)> {
        let mut out = Vec::new();
        let settled = self.is_settled(s);
        if !settled {
            for r in &self.rules {
                if s[r.fire] == 0 {
                    let mut d = s.to_vec();
                    d[r.fire] = -1;
                    for &(slot, v) in &r.assigns {
                        self.set_value(&mut d, slot, v);
                    }
                    if let Some(run) = r.run {
                        d[run] = 0;
                    }
                    out.push((Label::RuleFire(r.rule.id.clone()), self.finish(s, d, false)));
                }
                if self.run_ready(s, r) {
                    let mut d = s.to_vec();
                    for &(slot, v) in &r.completion {
                        self.set_value(&mut d, slot, v);
                    }
                    d[r.run.unwrap()] = -1;
                    out.push((Label::ActionComplete(r.rule.id.clone()), self.finish(s, d, false)));
                }
            }
            for sl in &self.slots {
                if let Some((log, age, l)) = sl.mirror {
                    if s[age] >= l {
                        let mut d = s.to_vec();
                        d[log] = s[sl.phys];
                        d[age] = 0;
                        out.push((Label::SensorUpdate(sl.decl.id.clone()), self.finish(s, d, false)));
                    }
                }
            }
        } else {
            self.env_changes(s, &mut out);
            self.ticks(s, &mut out);
        }
        out.push((Label::Stutter, self.finish(s, s.to_vec(), settled)));
        out.sort();
        out.dedup();
        out
    }

    fn env_changes(&self, s: &State, out: &mut Vec<(Label, State)>) {
        for sl in &self.slots {
            if sl.decl.controllable || sl.pinned {
                continue;
            }
            let cur = s[sl.phys] as i32;
            let targets: Vec<i32> = if sl.decl.is_tardy() {
                vec![cur - 1, cur + 1]
            } else {
                (sl.lo..=sl.hi).filter(|v| *v != cur).collect()
            };
            for t in targets.into_iter().filter(|t| (sl.lo..=sl.hi).contains(t)) {
                let mut d = s.to_vec();
                d[sl.phys] = t as i16;
                out.push((Label::EnvChange(sl.decl.id.clone()), self.finish(s, d, true)));
            }
        }
    }

    fn ticks(&self, s: &State, out: &mut Vec<(Label, State)>) {
        let mut base = s.to_vec();
        for r in &self.rules {
            if base[r.fire] > 0 {
                base[r.fire] -= 1;
            }
            if let Some(run) = r.run {
                if base[run] >= 0 && base[run] < r.run_cap {
                    base[run] += 1;
                }
            }
        }
        for sl in &self.slots {
            if let Some((_, age, l)) = sl.mirror {
                if base[age] < l {
                    base[age] += 1;
                }
            }
        }
        // per tardy attribute: options of (phys, progress)
        let mut variants: Vec<Vec<i16>> = vec![base];
        for (i, sl) in self.slots.iter().enumerate() {
            let (Some(p), Some(moves)) = (sl.progress, self.moves_for(s, i)) else {
                continue;
            };
            let cur = s[sl.phys] as i32;
            let mut opts: Vec<(i16, i16)> = Vec::new();
            if moves.cands.is_empty() {
                opts.push((cur as i16, 0));
            } else {
                let c = s[p] + 1;
                for m in &moves.cands {
                    if c == m.period {
                        let nv = (cur + (m.dir * m.step) as i32).clamp(sl.lo, sl.hi);
                        opts.push((nv as i16, 0));
                    }
                }
                if c < moves.max_period {
                    opts.push((cur as i16, c));
                } else if moves.stall || opts.is_empty() {
                    opts.push((cur as i16, 0));
                }
            }
            opts.sort();
            opts.dedup();
            let mut next = Vec::new();
            for v in &variants {
                for &(val, prog) in &opts {
                    let mut d = v.clone();
                    d[sl.phys] = val;
                    d[p] = prog;
                    next.push(d);
                }
            }
            variants = next;
        }
        for d in variants {
            out.push((Label::PhysicalTick, self.finish(s, d, true)));
        }
    }

    /// One-line rendering: `attr=value` pairs, sensed values in brackets when
    /// they lag, then active timers.
    pub fn describe(&self, s: &State) -> String {
        let mut parts = Vec::new();
        for sl in &self.slots {
            let v = sl.decl.domain.decode(s[sl.phys] as i32);
            match sl.mirror {
                Some((log, _, _)) if s[log] != s[sl.phys] => {
                    let lv = sl.decl.domain.decode(s[log] as i32);
                    parts.push(format!("{}={v}[{lv}]", sl.decl.id));
                }
                _ => parts.push(format!("{}={v}", sl.decl.id)),
            }
        }
        for r in &self.rules {
            if s[r.fire] >= 0 {
                parts.push(format!("{}.fire={}", r.rule.id, s[r.fire]));
            }
            if let Some(run) = r.run.filter(|&i| s[i] >= 0) {
                parts.push(format!("{}.run={}", r.rule.id, s[run]));
            }
        }
        parts.join(" ")
    }

    /// Breadth-first exploration of the reachable states.
    pub fn explore(self, cap: usize) -> Automaton {
        let mut states: Vec<State> = Vec::new();
        let mut index: HashMap<State, usize> = HashMap::new();
        let mut edges: Vec<Vec<(Label, usize)>> = Vec::new();
        let mut queue = VecDeque::new();
        let mut initial = Vec::new();
        let mut complete = true;
        for s in &self.initial {
            if !index.contains_key(s) {
                index.insert(s.clone(), states.len());
                initial.push(states.len());
                queue.push_back(states.len());
                states.push(s.clone());
                edges.push(Vec::new());
            }
        }
        while let Some(u) = queue.pop_front() {
            let succ = self.successors(&states[u]);
            let mut e = Vec::with_capacity(succ.len());
            for (l, t) in succ {
                let id = match index.get(&t) {
                    Some(&id) => id,
                    None => {
                        if states.len() >= cap {
                            complete = false;
                            continue;
                        }
                        let id = states.len();
                        index.insert(t.clone(), id);
                        states.push(t);
                        edges.push(Vec::new());
                        queue.push_back(id);
                        id
                    }
                };
                e.push((l, id));
            }
            edges[u] = e;
        }
        if !complete {
            log::warn!("state space truncated at {cap} states");
        }
        Automaton {
            model: self,
            states,
            index,
            initial,
            edges,
            complete,
        }
    }
}

fn dynamics_table(
    slots: &[AttrSlot],
    devices: &[usize],
    ch: Channel,
    table: &ChannelTable,
    tick: u32,
    seed: u64,
) -> Vec<Moves> {
    let sizes: Vec<i32> = devices.iter().map(|&d| slots[d].hi - slots[d].lo + 1).collect();
    let combos: usize = sizes.iter().map(|s| *s as usize).product();
    let mut out = Vec::with_capacity(combos * 4);
    for code in 0..combos {
        let mut rest = code;
        let mut active = Vec::new();
        for (k, &d) in devices.iter().enumerate().rev() {
            let v = (rest % sizes[k] as usize) as i32 + slots[d].lo;
            rest /= sizes[k] as usize;
            active.push((slots[d].decl.id.clone(), slots[d].decl.domain.decode(v)));
        }
        for ctx in [
            Some(Ordering::Less),
            Some(Ordering::Equal),
            Some(Ordering::Greater),
            None,
        ] {
            let ctx = EffectContext { outdoor_vs_indoor: ctx };
            let (lo, hi) = joint_effect(&active, ch, table, tick, &ctx);
            let sample = sampled_joint_effect(&active, ch, table, tick, &ctx, seed);
            out.push(moves_from_rates(lo, sample, hi));
        }
    }
    out
}

fn moves_from_rates(lo: f64, sample: f64, hi: f64) -> Moves {
    let mut m = Moves {
        stall: lo < 0.0 && hi > 0.0,
        ..Moves::default()
    };
    for r in [lo, sample, hi] {
        if r.abs() < 1e-9 {
            m.stall = true;
            continue;
        }
        let (step, period) = if r.abs() >= 1.0 {
            (r.abs().round() as i16, 1)
        } else {
            (1, (1.0 / r.abs()).ceil() as i32)
        };
        if period > MAX_PERIOD {
            m.stall = true;
            continue;
        }
        let mv = Move {
            dir: r.signum() as i16,
            step,
            period: period as i16,
        };
        if !m
            .cands
            .iter()
            .any(|x| x.dir == mv.dir && x.step == mv.step && x.period == mv.period)
        {
            m.cands.push(mv);
        }
    }
    m.max_period = m.cands.iter().map(|c| c.period).max().unwrap_or(0);
    m
}

/// Explicit reachable graph of a model.
#[derive(Debug, Clone)]
pub struct Automaton {
    pub model: Model,
    pub states: Vec<State>,
    pub index: HashMap<State, usize>,
    pub initial: Vec<usize>,
    pub edges: Vec<Vec<(Label, usize)>>,
    /// False when exploration stopped at the state cap.
    pub complete: bool,
}

impl Automaton {
    /// Successors of a state of this automaton.
    pub fn successors(&self, s: &State) -> Result<Vec<(Label, State)>, ModelError> {
        let &i = self.index.get(s).ok_or(ModelError::UnknownState)?;
        Ok(self.edges[i]
            .iter()
            .map(|(l, j)| (l.clone(), self.states[*j].clone()))
            .collect())
    }

    /// One transition per line: `<from> -<label>-> <to>`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, es) in self.edges.iter().enumerate() {
            for (l, j) in es {
                out.push_str(&format!("{i} -{l}-> {j}\n"));
            }
        }
        out
    }

    pub fn state_table(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.states.iter().enumerate() {
            out.push_str(&format!("{i}: {}\n", self.model.describe(s)));
        }
        out
    }
}

/// Relevance closure, compression and exhaustive exploration. Fails when the
/// state space exceeds `opts.state_cap`.
pub fn build_model(
    set: &RuleSet,
    props: &[&Property],
    scenario: &Scenario,
    table: &ChannelTable,
    opts: &BuildOptions,
) -> Result<Automaton, ModelError> {
    let m = Model::for_properties(set, props, scenario, table, opts);
    let a = m.explore(opts.state_cap);
    if a.complete {
        Ok(a)
    } else {
        Err(ModelError::StateCap(opts.state_cap))
    }
}
