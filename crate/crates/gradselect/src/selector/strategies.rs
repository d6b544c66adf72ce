//! Selection strategies: the two-stage filter-then-weight path and the
//! baselines and ablation variants it is compared against.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradcore::{inner_reordered, ProjectedSample, ValAggregate};
use crate::optstate::{precondition_target, Preconditioner};
use crate::selector::gram::{
    build_gram_system, build_gram_with_target, objective_on_subset, resolve_lambda, GramSystem,
};
use crate::selector::greedy::{greedy_filter_with, topk_select};
use crate::selector::omp::omp_select;
use crate::selector::solvers::{nnls_solve, ridge_solve};
use crate::selector::SelectionOutcome;

/// Every selectable strategy, keyed by its config string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Greedy residual filter on the preconditioned target, then global NNLS.
    TwoStage,
    /// Coupled OMP with ridge trial solves against the preconditioned target.
    Omp,
    /// Top-k by optimizer-aware alignment, uniform weights.
    TopkAware,
    /// Top-k by raw alignment, uniform weights.
    TopkRaw,
    /// Uniform random subset, uniform weights.
    Random,
    /// Coupled OMP against the raw target (no optimizer awareness).
    GradMatch,
    /// Top-k by optimizer-aware alignment, then NNLS reweighting.
    HardFilterReweight,
    /// Greedy filter and NNLS both against the raw target.
    VanillaReweight,
    /// Greedy filter on the preconditioned target, then unconstrained ridge.
    Unbounded,
}

pub const ALL_STRATEGIES: [Strategy; 9] = [
    Strategy::TwoStage,
    Strategy::Omp,
    Strategy::TopkAware,
    Strategy::TopkRaw,
    Strategy::Random,
    Strategy::GradMatch,
    Strategy::HardFilterReweight,
    Strategy::VanillaReweight,
    Strategy::Unbounded,
];

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::TwoStage => "two_stage",
            Strategy::Omp => "omp",
            Strategy::TopkAware => "topk_aware",
            Strategy::TopkRaw => "topk_raw",
            Strategy::Random => "random",
            Strategy::GradMatch => "grad_match",
            Strategy::HardFilterReweight => "hard_filter_reweight",
            Strategy::VanillaReweight => "vanilla_reweight",
            Strategy::Unbounded => "unbounded",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_STRATEGIES
            .iter()
            .find(|k| k.as_str() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown strategy \"{s}\"")))
    }
}

/// Everything a strategy needs for one selection step.
pub struct SelectionContext<'a> {
    pub candidates: &'a [ProjectedSample],
    /// Mean validation aggregate, unpreconditioned.
    pub raw_target: &'a ValAggregate,
    /// Mean validation aggregate after optimizer preconditioning.
    pub precond_target: &'a ValAggregate,
    pub budget: usize,
    /// Ridge coefficient relative to the mean Gram diagonal.
    pub lambda_rel: f64,
    /// When set, greedy residual updates subtract D ⊙ ∇l instead of ∇l.
    pub residual_preconditioner: Option<&'a Preconditioner>,
}

/// The full two-stage path: greedy filtering for a geometrically diverse
/// backbone, then one global non-negative solve for the weights.
pub fn two_stage_select(
    cands: &[ProjectedSample],
    raw_agg: &ValAggregate,
    precond_agg: &ValAggregate,
    budget: usize,
    lambda: f64,
) -> Result<SelectionOutcome> {
    let indices = greedy_filter_with(cands, precond_agg, budget, None)?;
    let sys = build_gram_system(cands, raw_agg, precond_agg, lambda)?;
    finish_with_nnls(&sys, indices)
}

fn finish_with_nnls(sys: &GramSystem, indices: Vec<usize>) -> Result<SelectionOutcome> {
    let weights = nnls_solve(sys, &indices)?;
    let objective = objective_on_subset(sys, &indices, &weights)?;
    Ok(SelectionOutcome {
        indices,
        weights,
        objective,
        residual_norm: objective.max(0.0).sqrt(),
    })
}

fn uniform_outcome(sys: &GramSystem, indices: Vec<usize>) -> Result<SelectionOutcome> {
    let w = 1.0 / indices.len() as f64;
    let weights = vec![w; indices.len()];
    let objective = objective_on_subset(sys, &indices, &weights)?;
    Ok(SelectionOutcome {
        indices,
        weights,
        objective,
        residual_norm: objective.max(0.0).sqrt(),
    })
}

/// Flag a raw aggregate as identity-preconditioned so it can serve as a
/// matching target for the vanilla/raw variants.
fn identity_preconditioned(raw: &ValAggregate) -> Result<ValAggregate> {
    precondition_target(raw, &Preconditioner::identity(&raw.shapes()))
}

fn alignment_scores(cands: &[ProjectedSample], target: &ValAggregate) -> Result<Vec<f64>> {
    cands.iter().map(|c| inner_reordered(c, target)).collect()
}

/// Dispatch one selection step. `rng` drives only the random baseline.
pub fn run_strategy(
    strategy: Strategy,
    ctx: &SelectionContext<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<SelectionOutcome> {
    let cands = ctx.candidates;
    if ctx.budget > cands.len() {
        return Err(Error::InvalidArgument(format!(
            "budget {} exceeds pool size {}",
            ctx.budget,
            cands.len()
        )));
    }
    match strategy {
        Strategy::TwoStage => {
            let mut sys = build_gram_system(cands, ctx.raw_target, ctx.precond_target, 0.0)?;
            sys.lambda = resolve_lambda(ctx.lambda_rel, &sys);
            let indices = greedy_filter_with(
                cands,
                ctx.precond_target,
                ctx.budget,
                ctx.residual_preconditioner,
            )?;
            finish_with_nnls(&sys, indices)
        }
        Strategy::Omp => {
            let mut sys = build_gram_system(cands, ctx.raw_target, ctx.precond_target, 0.0)?;
            sys.lambda = resolve_lambda(ctx.lambda_rel, &sys);
            omp_select(&sys, ctx.budget)
        }
        Strategy::GradMatch => {
            let raw_flagged = identity_preconditioned(ctx.raw_target)?;
            let mut sys = build_gram_with_target(cands, &raw_flagged, 0.0)?;
            sys.lambda = resolve_lambda(ctx.lambda_rel, &sys);
            omp_select(&sys, ctx.budget)
        }
        Strategy::TopkAware => {
            let scores = alignment_scores(cands, ctx.precond_target)?;
            let indices = topk_select(&scores, ctx.budget)?;
            let mut sys = build_gram_system(cands, ctx.raw_target, ctx.precond_target, 0.0)?;
            sys.lambda = resolve_lambda(ctx.lambda_rel, &sys);
            uniform_outcome(&sys, indices)
        }
        Strategy::TopkRaw => {
            let scores = alignment_scores(cands, ctx.raw_target)?;
            let indices = topk_select(&scores, ctx.budget)?;
            let mut sys = build_gram_system(cands, ctx.raw_target, ctx.precond_target, 0.0)?;
            sys.lambda = resolve_lambda(ctx.lambda_rel, &sys);
            uniform_outcome(&sys, indices)
        }
        Strategy::Random => {
            // Partial Fisher-Yates over candidate indices.
            let mut order: Vec<usize> = (0..cands.len()).collect();
            for i in 0..ctx.budget {
                let j = i + rng.random_range(0..cands.len() - i);
                order.swap(i, j);
            }
            order.truncate(ctx.budget);
            let mut sys = build_gram_system(cands, ctx.raw_target, ctx.precond_target, 0.0)?;
            sys.lambda = resolve_lambda(ctx.lambda_rel, &sys);
            uniform_outcome(&sys, order)
        }
        Strategy::HardFilterReweight => {
            let scores = alignment_scores(cands, ctx.precond_target)?;
            let indices = topk_select(&scores, ctx.budget)?;
            let mut sys = build_gram_system(cands, ctx.raw_target, ctx.precond_target, 0.0)?;
            sys.lambda = resolve_lambda(ctx.lambda_rel, &sys);
            finish_with_nnls(&sys, indices)
        }
        Strategy::VanillaReweight => {
            let raw_flagged = identity_preconditioned(ctx.raw_target)?;
            let indices = greedy_filter_with(cands, &raw_flagged, ctx.budget, None)?;
            let mut sys = build_gram_with_target(cands, &raw_flagged, 0.0)?;
            sys.lambda = resolve_lambda(ctx.lambda_rel, &sys);
            finish_with_nnls(&sys, indices)
        }
        Strategy::Unbounded => {
            let mut sys = build_gram_system(cands, ctx.raw_target, ctx.precond_target, 0.0)?;
            sys.lambda = resolve_lambda(ctx.lambda_rel, &sys);
            let indices = greedy_filter_with(
                cands,
                ctx.precond_target,
                ctx.budget,
                ctx.residual_preconditioner,
            )?;
            let weights = ridge_solve(&sys, &indices)?;
            let objective = objective_on_subset(&sys, &indices, &weights)?;
            Ok(SelectionOutcome {
                indices,
                weights,
                objective,
                residual_norm: objective.max(0.0).sqrt(),
            })
        }
    }
}
