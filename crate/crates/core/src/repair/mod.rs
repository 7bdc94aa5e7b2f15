//! Counterexample-guided repair of a violated property.
//!
//! A defect trace spans a small abstract model whose boolean flags stand for
//! predicates that may be added to the rules. Flag assignments are tried in
//! cost order; each is lowered to rule edits, replayed against the trace's
//! environment schedule, classified locally and, if feasible, re-verified
//! against the whole property set. Candidates that only shrink the defect
//! are deferred and repaired recursively in a later round.

mod abstraction;
mod edit;
mod reason;

use serde::Serialize;
use thiserror::Error;

pub use abstraction::{abstract_model, refine, AbstractModel, Assignment, Flag, Step, TooManyPredicates};
pub use edit::{apply_edits, fresh_rule_id, EditError, RuleEdit};
pub use reason::{check_local_feasibility, replay, PatchClass, Replay, Run};

use crate::automaton::{select_relevant, BuildOptions, Model};
use crate::checker::{check_model, locate_violating_state, CheckError, Counterexample, Verdict};
use crate::env::ChannelTable;
use crate::props::Property;
use crate::rule::RuleSet;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Limits {
    pub round_limit: usize,
    /// Iterations per round.
    pub iter_limit: usize,
    pub max_flags: usize,
    /// Largest number of flags a single patch may set.
    pub max_patch_flags: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            round_limit: 15,
            iter_limit: 50,
            max_flags: 64,
            max_patch_flags: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RepairContext<'a> {
    pub scenario: &'a Scenario,
    pub table: &'a ChannelTable,
    pub opts: BuildOptions,
    pub limits: Limits,
    /// Properties that hold and must keep holding.
    pub guard: Vec<Property>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct NprStats {
    pub iterations: usize,
    pub rounds: usize,
    /// Every candidate tried: round, flags, class.
    pub history: Vec<(usize, String, PatchClass)>,
    pub flag_audits: usize,
    pub flag_violations: usize,
    pub global_checks: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RepairError {
    #[error("property {0} holds; nothing to repair")]
    NotViolated(String),
    #[error("verification of {0} was inconclusive")]
    Inconclusive(String),
    #[error(transparent)]
    TooManyPredicates(#[from] TooManyPredicates),
    #[error("round limit of {0} reached")]
    RoundLimit(usize),
    #[error("iteration limit reached")]
    IterationLimit,
    #[error("no feasible patch among the candidates")]
    Exhausted,
    #[error(transparent)]
    Locate(#[from] CheckError),
}

/// Outcome of re-verifying a patched rule set.
#[derive(Debug, Clone)]
pub enum Global {
    Pass,
    /// Another property that used to hold now fails (or could not be
    /// decided).
    Breaks(String),
    /// The target still fails, on a different trace.
    Residual(Counterexample),
}

/// Checks the target and every guarded property on the patched rules.
pub fn verify_global_feasibility(set: &RuleSet, property: &Property, ctx: &RepairContext) -> Global {
    let cap = ctx.opts.state_cap;
    let m = Model::for_properties(set, &[property], ctx.scenario, ctx.table, &ctx.opts);
    match check_model(&m, property, cap).verdict {
        Verdict::Pass => {}
        Verdict::Violation(c) => return Global::Residual(c),
        Verdict::Inconclusive => return Global::Breaks(property.id.clone()),
    }
    for p in ctx.guard.iter().filter(|p| p.id != property.id) {
        let m = Model::for_properties(set, &[p], ctx.scenario, ctx.table, &ctx.opts);
        if !check_model(&m, p, cap).passed() {
            return Global::Breaks(p.id.clone());
        }
    }
    Global::Pass
}

/// Index of the first settled state of the trace that violates the property.
pub fn search_spurious_indicator(m: &Model, cex: &Counterexample, p: &Property) -> Result<usize, CheckError> {
    locate_violating_state(m, cex, p)
}

/// Properties of `catalog` that apply to `set` and currently hold.
pub fn in_scope_properties(
    set: &RuleSet,
    catalog: &[Property],
    scenario: &Scenario,
    table: &ChannelTable,
    opts: &BuildOptions,
) -> Vec<Property> {
    catalog
        .iter()
        .filter(|p| p.applies_to(set))
        .filter(|p| {
            let m = Model::for_properties(set, &[p], scenario, table, opts);
            check_model(&m, p, opts.state_cap).passed()
        })
        .cloned()
        .collect()
}

struct Deferred {
    edits: Vec<RuleEdit>,
    set: RuleSet,
    cex: Counterexample,
}

/// Repairs one defect trace of `property`, returning the edits to apply to
/// `set`. `rnd` counts recursive rounds.
pub fn npr(
    set: &RuleSet,
    property: &Property,
    cex: &Counterexample,
    ctx: &RepairContext,
    stats: &mut NprStats,
    rnd: usize,
) -> Result<Vec<RuleEdit>, RepairError> {
    if rnd >= ctx.limits.round_limit {
        return Err(RepairError::RoundLimit(ctx.limits.round_limit));
    }
    stats.rounds = stats.rounds.max(rnd + 1);
    let model = Model::for_properties(set, &[property], ctx.scenario, ctx.table, &ctx.opts);
    search_spurious_indicator(&model, cex, property)?;
    let (_, attrs) = select_relevant(set, &[property], ctx.table);
    let mut am = abstract_model(set, property, &attrs, cex, &model, ctx.limits.max_flags)?;
    let candidates = am.candidates(ctx.limits.max_patch_flags);
    let total_budget = ctx.limits.round_limit * ctx.limits.iter_limit;
    let mut deferred: Vec<(Assignment, Deferred)> = Vec::new();
    let mut used = 0;
    let mut i = 0;
    while i < candidates.len() {
        let a = &candidates[i];
        // a deferred candidate outranks anything costlier
        if let Some(min) = deferred.iter().map(|(d, _)| am.cost(d)).min() {
            if am.cost(a) > min {
                break;
            }
        }
        if am.invariants.contains(a) {
            i += 1;
            continue;
        }
        if used >= ctx.limits.iter_limit || stats.iterations >= total_budget {
            if deferred.is_empty() {
                return Err(RepairError::IterationLimit);
            }
            break;
        }
        used += 1;
        stats.iterations += 1;
        stats.flag_audits += 1;
        if !am.flag_sums_ok(a) {
            stats.flag_violations += 1;
            am.invariants.insert(a.clone());
            i += 1;
            continue;
        }
        let edits = am.edits(a);
        let Ok(patched) = apply_edits(set, &edits) else {
            am.invariants.insert(a.clone());
            i += 1;
            continue;
        };
        let (class, moved) = match replay(&am, &patched, ctx.scenario, ctx.table, &ctx.opts) {
            Replay::Success(run, m) => check_local_feasibility(&am, a, &run, &m, &cex.labels),
            Replay::NoPath | Replay::Violates => (PatchClass::Excluded, vec![]),
        };
        stats.history.push((rnd, am.describe(a), class));
        log::debug!("round {rnd} [{}] -> {class:?}", am.describe(a));
        match class {
            PatchClass::Infeasible if moved.iter().all(|x| am.frozen.contains(x)) => refine(&mut am, a, &[]),
            PatchClass::Infeasible => {
                // retry the same candidate on the refined model
                refine(&mut am, a, &moved);
                continue;
            }
            PatchClass::Excluded => refine(&mut am, a, &[]),
            PatchClass::Concrete => {
                stats.global_checks += 1;
                match verify_global_feasibility(&patched, property, ctx) {
                    Global::Pass => return Ok(edits),
                    Global::Breaks(p) => {
                        log::debug!("  breaks {p}");
                        refine(&mut am, a, &[]);
                    }
                    Global::Residual(c) => {
                        refine(&mut am, a, &[]);
                        deferred.push((
                            a.clone(),
                            Deferred {
                                edits,
                                set: patched,
                                cex: c,
                            },
                        ));
                    }
                }
            }
        }
        i += 1;
    }
    for (_, d) in deferred {
        if let Ok(more) = npr(&d.set, property, &d.cex, ctx, stats, rnd + 1) {
            let mut edits = d.edits;
            edits.extend(more);
            return Ok(edits);
        }
    }
    Err(RepairError::Exhausted)
}

/// Result of repairing one property.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyRepair {
    pub property: String,
    pub violated: bool,
    pub edits: Vec<RuleEdit>,
    pub error: Option<String>,
    pub stats: NprStats,
}

impl PropertyRepair {
    pub fn repaired(&self) -> bool {
        self.violated && self.error.is_none()
    }
}

/// Repairs `targets` one after another, in the given order. Each repaired
/// target joins the guard so later repairs may not undo it.
pub fn repair(set: &RuleSet, targets: &[Property], ctx: &RepairContext) -> (RuleSet, Vec<PropertyRepair>) {
    let mut current = set.clone();
    let mut guard = ctx.guard.clone();
    let mut out = Vec::new();
    for p in targets {
        let mut report = PropertyRepair {
            property: p.id.clone(),
            violated: false,
            edits: vec![],
            error: None,
            stats: NprStats::default(),
        };
        let m = Model::for_properties(&current, &[p], ctx.scenario, ctx.table, &ctx.opts);
        match check_model(&m, p, ctx.opts.state_cap).verdict {
            Verdict::Pass => {
                guard.push(p.clone());
            }
            Verdict::Inconclusive => {
                report.error = Some(RepairError::Inconclusive(p.id.clone()).to_string());
            }
            Verdict::Violation(cex) => {
                report.violated = true;
                let local = RepairContext {
                    guard: guard.clone(),
                    ..ctx.clone()
                };
                match npr(&current, p, &cex, &local, &mut report.stats, 0) {
                    Ok(edits) => {
                        current = apply_edits(&current, &edits).expect("edits were validated");
                        report.edits = edits;
                        guard.push(p.clone());
                    }
                    Err(e) => report.error = Some(e.to_string()),
                }
            }
        }
        out.push(report);
    }
    (current, out)
}
