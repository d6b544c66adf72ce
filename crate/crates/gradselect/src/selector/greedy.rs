//! Greedy residual filtering and plain top-k selection.

use crate::error::{Error, Result};
use crate::gradcore::kernels::contract_against;
use crate::gradcore::{ProjectedSample, ValAggregate};
use crate::linalg::Mat;
use crate::optstate::Preconditioner;

/// Greedy residual search: repeatedly take the candidate best aligned with
/// the remaining target, then subtract that candidate's raw projected
/// gradient from the residual.
///
/// The residual starts at the preconditioned target while the subtracted
/// candidate matrices stay raw; that asymmetry is the published algorithm.
/// Pass a preconditioner as `residual_precond` to scale the subtracted
/// candidates instead (off by default). Ties go to the lowest index.
pub fn greedy_filter(
    cands: &[ProjectedSample],
    precond_agg: &ValAggregate,
    budget: usize,
) -> Result<Vec<usize>> {
    greedy_filter_with(cands, precond_agg, budget, None)
}

pub fn greedy_filter_with(
    cands: &[ProjectedSample],
    precond_agg: &ValAggregate,
    budget: usize,
    residual_precond: Option<&Preconditioner>,
) -> Result<Vec<usize>> {
    if budget > cands.len() {
        return Err(Error::InvalidArgument(format!(
            "budget {budget} exceeds candidate count {}",
            cands.len()
        )));
    }
    let mut residual: Vec<Mat> = precond_agg.per_layer.clone();
    let mut selected = Vec::with_capacity(budget);
    let mut taken = vec![false; cands.len()];
    for _ in 0..budget {
        let mut best: Option<(usize, f64)> = None;
        for (i, cand) in cands.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let score = contract_against(cand, &residual)?;
            if best.is_none_or(|(_, bs)| score > bs) {
                best = Some((i, score));
            }
        }
        let (pick, _) = best.expect("budget <= candidate count");
        taken[pick] = true;
        selected.push(pick);
        for (layer, (r, pair)) in residual.iter_mut().zip(&cands[pick].layers).enumerate() {
            let outer = pair.factor_outer();
            match residual_precond {
                None => r.add_scaled(&outer, -1.0),
                Some(d) => r.add_scaled(&d.per_layer[layer].hadamard(&outer), -1.0),
            }
        }
    }
    Ok(selected)
}

/// Indices of the `budget` largest scores, ties broken by lower index.
pub fn topk_select(scores: &[f64], budget: usize) -> Result<Vec<usize>> {
    if budget > scores.len() {
        return Err(Error::InvalidArgument(format!(
            "budget {budget} exceeds candidate count {}",
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("topk_select scores"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| {
        scores[j]
            .partial_cmp(&scores[i])
            .expect("scores checked finite")
            .then(i.cmp(&j))
    });
    order.truncate(budget);
    Ok(order)
}
