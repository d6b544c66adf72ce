//! The quadratic system behind the matching objective.
//!
//! Expanding ‖target − Σᵢ wᵢ ∇lᵢ‖² + λ‖w‖² gives
//! `target_sq_norm − 2 wᵀb + wᵀGw + λ‖w‖²` with the alignment vector b
//! against the preconditioned target and the Gram matrix G over raw
//! candidate gradients. The asymmetry is deliberate: b carries the optimizer
//! state, G measures geometric redundancy undistorted.

use crate::error::{Error, Result};
use crate::gradcore::{inner_ghost, inner_reordered, ProjectedSample, ValAggregate};
use crate::linalg::Mat;

#[derive(Debug, Clone, PartialEq)]
pub struct GramSystem {
    /// n×n raw pairwise gradient inner products.
    pub gram: Mat,
    /// Optimizer-aware alignment scores b.
    pub align: Vec<f64>,
    /// Ridge coefficient λ ≥ 0.
    pub lambda: f64,
    /// ‖target‖² of the preconditioned target.
    pub target_sq_norm: f64,
}

impl GramSystem {
    pub fn n(&self) -> usize {
        self.align.len()
    }

    /// Mean of the Gram diagonal; the usual reference scale for λ.
    pub fn mean_diag(&self) -> f64 {
        let n = self.n();
        if n == 0 {
            return 0.0;
        }
        (0..n).map(|i| self.gram.at(i, i)).sum::<f64>() / n as f64
    }
}

/// Resolve a relative ridge coefficient against the Gram diagonal scale.
pub fn resolve_lambda(lambda_rel: f64, sys: &GramSystem) -> f64 {
    let diag = sys.mean_diag();
    if diag > 0.0 {
        lambda_rel * diag
    } else {
        lambda_rel.max(1e-12)
    }
}

/// Build the system: G from pairwise ghost products on the raw projected
/// candidates, b and the target norm from the preconditioned aggregate.
pub fn build_gram_system(
    cands: &[ProjectedSample],
    raw_agg: &ValAggregate,
    precond_agg: &ValAggregate,
    lambda: f64,
) -> Result<GramSystem> {
    if raw_agg.preconditioned {
        return Err(Error::InvalidArgument(
            "raw aggregate must be unpreconditioned".into(),
        ));
    }
    if raw_agg.count != precond_agg.count {
        return Err(Error::InvalidArgument(format!(
            "aggregates built from different batches ({} vs {} samples)",
            raw_agg.count, precond_agg.count
        )));
    }
    if raw_agg.shapes() != precond_agg.shapes() {
        return Err(Error::ShapeMismatch("aggregate layer shapes differ".into()));
    }
    build_gram_with_target(cands, precond_agg, lambda)
}

/// Same construction against a single target aggregate, which must already
/// carry its preconditioning flag (identity preconditioning counts).
pub fn build_gram_with_target(
    cands: &[ProjectedSample],
    target: &ValAggregate,
    lambda: f64,
) -> Result<GramSystem> {
    if cands.is_empty() {
        return Err(Error::EmptyInput("build_gram_system needs candidates"));
    }
    if !target.preconditioned {
        return Err(Error::InvalidArgument(
            "target aggregate must be preconditioned (identity counts)".into(),
        ));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidArgument("lambda must be >= 0".into()));
    }
    let n = cands.len();
    let mut gram = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = inner_ghost(&cands[i], &cands[j])?;
            *gram.at_mut(i, j) = v;
            *gram.at_mut(j, i) = v;
        }
    }
    let mut align = Vec::with_capacity(n);
    for c in cands {
        align.push(inner_reordered(c, target)?);
    }
    Ok(GramSystem {
        gram,
        align,
        lambda,
        target_sq_norm: target.frob_norm_sq(),
    })
}

/// Eq-6 objective through the expansion: ‖t‖² − 2wᵀb + wᵀGw + λ‖w‖².
pub fn objective_value(sys: &GramSystem, w: &[f64]) -> Result<f64> {
    if w.len() != sys.n() {
        return Err(Error::ShapeMismatch(format!(
            "weight vector has {} entries for {} candidates",
            w.len(),
            sys.n()
        )));
    }
    let mut cross = 0.0;
    let mut quad = 0.0;
    let mut reg = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        cross += wi * sys.align[i];
        reg += wi * wi;
        if wi != 0.0 {
            let row = sys.gram.row(i);
            let mut acc = 0.0;
            for (j, &wj) in w.iter().enumerate() {
                acc += wj * row[j];
            }
            quad += wi * acc;
        }
    }
    Ok(sys.target_sq_norm - 2.0 * cross + quad + sys.lambda * reg)
}

/// Objective restricted to a subset: weights w align with `subset` indices,
/// all other candidates implicitly zero.
pub fn objective_on_subset(sys: &GramSystem, subset: &[usize], w: &[f64]) -> Result<f64> {
    if subset.len() != w.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} weights for {} subset indices",
            w.len(),
            subset.len()
        )));
    }
    check_subset(sys, subset)?;
    let mut cross = 0.0;
    let mut quad = 0.0;
    let mut reg = 0.0;
    for (a, (&i, &wi)) in subset.iter().zip(w).enumerate() {
        cross += wi * sys.align[i];
        reg += wi * wi;
        for (&j, &wj) in subset.iter().zip(w).skip(a) {
            let term = wi * wj * sys.gram.at(i, j);
            // Off-diagonal pairs appear twice in the double sum.
            quad += if i == j { term } else { 2.0 * term };
        }
    }
    Ok(sys.target_sq_norm - 2.0 * cross + quad + sys.lambda * reg)
}

/// Extract the |S|×|S| principal submatrix and matching alignment entries.
pub(crate) fn subset_system(sys: &GramSystem, subset: &[usize]) -> Result<(Mat, Vec<f64>)> {
    check_subset(sys, subset)?;
    let k = subset.len();
    let g_s = Mat::from_fn(k, k, |a, b| sys.gram.at(subset[a], subset[b]));
    let b_s = subset.iter().map(|&i| sys.align[i]).collect();
    Ok((g_s, b_s))
}

pub(crate) fn check_subset(sys: &GramSystem, subset: &[usize]) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::EmptyInput("subset must be non-empty"));
    }
    let mut seen = vec![false; sys.n()];
    for &i in subset {
        if i >= sys.n() {
            return Err(Error::InvalidArgument(format!(
                "subset index {i} out of range for {} candidates",
                sys.n()
            )));
        }
        if seen[i] {
            return Err(Error::InvalidArgument(format!(
                "duplicate subset index {i}"
            )));
        }
        seen[i] = true;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcore::{val_aggregate, FactorPair};
    use crate::linalg::frob_inner;
    use crate::optstate::{precondition_target, Preconditioner};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_cand(
        rng: &mut ChaCha8Rng,
        id: usize,
        d1: usize,
        d2: usize,
        t: usize,
    ) -> ProjectedSample {
        ProjectedSample {
            sample_id: id,
            layers: vec![FactorPair::new(
                0,
                Mat::from_fn(d1, t, |_, _| rng.random::<f64>() * 2.0 - 1.0),
                Mat::from_fn(d2, t, |_, _| rng.random::<f64>() * 2.0 - 1.0),
            )
            .unwrap()],
        }
    }

    fn identity_flagged(agg: &ValAggregate) -> ValAggregate {
        let d = Preconditioner::identity(&agg.shapes());
        precondition_target(agg, &d).unwrap()
    }

    #[test]
    fn self_target_candidate() {
        // One candidate equal to the (identity-preconditioned) target:
        // b = [‖t‖²], G = [[‖t‖²]].
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = rand_cand(&mut rng, 0, 3, 2, 1);
        let raw = val_aggregate(std::slice::from_ref(&c)).unwrap();
        let pre = identity_flagged(&raw);
        let sys = build_gram_system(std::slice::from_ref(&c), &raw, &pre, 0.0).unwrap();
        let t2 = pre.frob_norm_sq();
        assert!((sys.align[0] - t2).abs() < 1e-12 * (1.0 + t2));
        assert!((sys.gram.at(0, 0) - t2).abs() < 1e-12 * (1.0 + t2));
        assert!((sys.target_sq_norm - t2).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_candidates_give_diagonal_gram() {
        // Activations on disjoint coordinates make all cross products vanish.
        let mk = |id: usize, coord: usize| ProjectedSample {
            sample_id: id,
            layers: vec![FactorPair::new(
                0,
                Mat::from_fn(3, 1, |i, _| if i == coord { 1.0 } else { 0.0 }),
                Mat::from_fn(2, 1, |i, _| (i + id) as f64 + 1.0),
            )
            .unwrap()],
        };
        let cands: Vec<_> = (0..3).map(|i| mk(i, i)).collect();
        let raw = val_aggregate(&cands).unwrap();
        let pre = identity_flagged(&raw);
        let sys = build_gram_system(&cands, &raw, &pre, 0.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(sys.gram.at(i, j), 0.0);
                } else {
                    assert!(sys.gram.at(i, i) > 0.0);
                }
            }
        }
    }

    #[test]
    fn gram_matches_materialized_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cands: Vec<_> = (0..6).map(|i| rand_cand(&mut rng, i, 4, 3, 2)).collect();
        let vals: Vec<_> = (10..13).map(|i| rand_cand(&mut rng, i, 4, 3, 2)).collect();
        let raw = val_aggregate(&vals).unwrap();
        let pre = identity_flagged(&raw);
        let sys = build_gram_system(&cands, &raw, &pre, 0.5).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let oracle = frob_inner(
                    &cands[i].layers[0].materialize(),
                    &cands[j].layers[0].materialize(),
                );
                let got = sys.gram.at(i, j);
                assert!(
                    (oracle - got).abs() <= 1e-9 * (1.0 + oracle.abs()),
                    "G[{i},{j}] {got} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn empty_candidates_rejected() {
        let raw = ValAggregate::zeros(&[(2, 2)]);
        let pre = identity_flagged(&raw);
        assert!(matches!(
            build_gram_system(&[], &raw, &pre, 0.0),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn objective_at_zero_weights_is_target_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cands: Vec<_> = (0..4).map(|i| rand_cand(&mut rng, i, 3, 3, 1)).collect();
        let vals: Vec<_> = (4..6).map(|i| rand_cand(&mut rng, i, 3, 3, 1)).collect();
        let raw = val_aggregate(&vals).unwrap();
        let pre = identity_flagged(&raw);
        let sys = build_gram_system(&cands, &raw, &pre, 0.3).unwrap();
        let obj = objective_value(&sys, &[0.0; 4]).unwrap();
        assert_eq!(obj, sys.target_sq_norm);
    }

    #[test]
    fn objective_scalar_algebra() {
        let sys = GramSystem {
            gram: Mat::from_vec(1, 1, vec![1.0]),
            align: vec![1.0],
            lambda: 0.0,
            target_sq_norm: 7.0,
        };
        assert_eq!(objective_value(&sys, &[1.0]).unwrap(), 6.0);
    }

    #[test]
    fn objective_matches_materialized_residual() {
        // Unpreconditioned target (D = 1): objective must equal the direct
        // ‖target − Σ wᵢ ∇lᵢ‖² + λ‖w‖² on materialized gradients.
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let cands: Vec<_> = (0..5).map(|i| rand_cand(&mut rng, i, 3, 4, 2)).collect();
        let vals: Vec<_> = (5..8).map(|i| rand_cand(&mut rng, i, 3, 4, 2)).collect();
        let raw = val_aggregate(&vals).unwrap();
        let pre = identity_flagged(&raw);
        let lambda = 0.25;
        let sys = build_gram_system(&cands, &raw, &pre, lambda).unwrap();
        let w: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let fast = objective_value(&sys, &w).unwrap();

        // target matrix is the d1×d2 aggregate; candidate outer products live
        // in the same orientation.
        let mut resid = pre.per_layer[0].clone();
        for (c, &wi) in cands.iter().zip(&w) {
            resid.add_scaled(&c.layers[0].factor_outer(), -wi);
        }
        let slow = resid.frob_norm_sq() + lambda * w.iter().map(|x| x * x).sum::<f64>();
        assert!(
            (fast - slow).abs() <= 1e-9 * (1.0 + slow.abs()),
            "{fast} vs {slow}"
        );
    }

    #[test]
    fn objective_dimension_mismatch_rejected() {
        let sys = GramSystem {
            gram: Mat::zeros(2, 2),
            align: vec![0.0; 2],
            lambda: 0.0,
            target_sq_norm: 0.0,
        };
        assert!(objective_value(&sys, &[0.0; 3]).is_err());
    }

    #[test]
    fn subset_objective_agrees_with_padded_full_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let cands: Vec<_> = (0..6).map(|i| rand_cand(&mut rng, i, 3, 3, 1)).collect();
        let vals: Vec<_> = (6..9).map(|i| rand_cand(&mut rng, i, 3, 3, 1)).collect();
        let raw = val_aggregate(&vals).unwrap();
        let pre = identity_flagged(&raw);
        let sys = build_gram_system(&cands, &raw, &pre, 0.1).unwrap();
        let subset = [4usize, 1, 3];
        let w_sub = [0.5, -0.25, 1.5];
        let mut w_full = vec![0.0; 6];
        for (&i, &wi) in subset.iter().zip(&w_sub) {
            w_full[i] = wi;
        }
        let a = objective_on_subset(&sys, &subset, &w_sub).unwrap();
        let b = objective_value(&sys, &w_full).unwrap();
        assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
    }
}
