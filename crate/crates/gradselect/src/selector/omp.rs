//! Orthogonal matching pursuit over a precomputed Gram system.
//!
//! Each round trials every remaining candidate, ridge-solves the trial set,
//! and keeps the set with the smallest objective. Weights may go negative
//! here; that is the coupled baseline this crate's two-stage path improves
//! on.

use crate::error::{Error, Result};
use crate::selector::gram::{objective_on_subset, GramSystem};
use crate::selector::solvers::ridge_solve;
use crate::selector::SelectionOutcome;

pub fn omp_select(sys: &GramSystem, budget: usize) -> Result<SelectionOutcome> {
    if budget > sys.n() {
        return Err(Error::InvalidArgument(format!(
            "budget {budget} exceeds candidate count {}",
            sys.n()
        )));
    }
    if sys.lambda <= 0.0 {
        return Err(Error::InvalidArgument(
            "omp_select requires lambda > 0".into(),
        ));
    }
    let mut selected: Vec<usize> = Vec::with_capacity(budget);
    let mut weights: Vec<f64> = Vec::new();
    let mut objective = sys.target_sq_norm;
    let mut in_set = vec![false; sys.n()];

    for _ in 0..budget {
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        let mut trial = selected.clone();
        trial.push(0);
        for u in 0..sys.n() {
            if in_set[u] {
                continue;
            }
            *trial.last_mut().expect("trial is non-empty") = u;
            let w = ridge_solve(sys, &trial)?;
            let obj = objective_on_subset(sys, &trial, &w)?;
            if best.as_ref().is_none_or(|(_, bo, _)| obj < *bo) {
                best = Some((u, obj, w));
            }
        }
        let (u, obj, w) = best.expect("budget <= candidate count");
        in_set[u] = true;
        selected.push(u);
        weights = w;
        objective = obj;
    }

    Ok(SelectionOutcome {
        indices: selected,
        weights,
        objective,
        residual_norm: objective.max(0.0).sqrt(),
    })
}
