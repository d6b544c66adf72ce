//! Closed-form utility scores and the alignment/distance equivalences.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::selector::gram::GramSystem;

/// First-order per-sample utility: −lr · wᵢ · bᵢ, the one-step change in
/// target loss attributable to sample i at weight wᵢ.
pub fn shapley_first_order(w_i: f64, align_i: f64, lr: f64) -> f64 {
    -lr * w_i * align_i
}

/// Second-order subset utility under the identity-Hessian simplification:
/// −lr·wᵀb + (lr²/2)·wᵀGw.
pub fn second_order_utility(sys: &GramSystem, w: &[f64], lr: f64) -> Result<f64> {
    if w.len() != sys.n() {
        return Err(Error::ShapeMismatch(format!(
            "weight vector has {} entries for {} candidates",
            w.len(),
            sys.n()
        )));
    }
    let cross = dot(w, &sys.align);
    let mut quad = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        if wi != 0.0 {
            quad += wi * dot(sys.gram.row(i), w);
        }
    }
    Ok(-lr * cross + 0.5 * lr * lr * quad)
}

/// The four arg-optima of the alignment/distance equivalences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignmentArgOptima {
    /// argmaxᵢ ⟨v, hᵢ⟩
    pub argmax_ip: usize,
    /// argminᵢ (‖v − hᵢ‖² − ‖hᵢ‖²)
    pub argmin_shifted_l2: usize,
    /// argmaxᵢ cos(v, hᵢ)
    pub argmax_cos: usize,
    /// argminᵢ ‖v̂ − ĥᵢ‖² on unit-normalized vectors
    pub argmin_unit_l2: usize,
}

/// Computes all four optima; inner-product maximization must agree with
/// shifted squared-distance minimization, and cosine maximization with
/// unit-normalized distance minimization. Ties go to the lowest index in
/// every branch.
pub fn alignment_l2_check(v: &[f64], candidates: &[Vec<f64>]) -> Result<AlignmentArgOptima> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("alignment_l2_check needs candidates"));
    }
    let v_norm = norm(v);
    if v_norm == 0.0 {
        return Err(Error::InvalidArgument(
            "zero-norm reference vector in cosine branch".into(),
        ));
    }
    for (i, h) in candidates.iter().enumerate() {
        if h.len() != v.len() {
            return Err(Error::ShapeMismatch(format!(
                "candidate {i} has dim {} but v has {}",
                h.len(),
                v.len()
            )));
        }
        if norm(h) == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "zero-norm candidate {i} in cosine branch"
            )));
        }
    }

    let argmax_by = |f: &dyn Fn(&[f64]) -> f64| -> usize {
        let mut best = 0;
        let mut best_v = f(&candidates[0]);
        for (i, h) in candidates.iter().enumerate().skip(1) {
            let val = f(h);
            if val > best_v {
                best_v = val;
                best = i;
            }
        }
        best
    };
    let argmin_by = |f: &dyn Fn(&[f64]) -> f64| -> usize {
        let mut best = 0;
        let mut best_v = f(&candidates[0]);
        for (i, h) in candidates.iter().enumerate().skip(1) {
            let val = f(h);
            if val < best_v {
                best_v = val;
                best = i;
            }
        }
        best
    };

    let ip = |h: &[f64]| dot(v, h);
    let shifted = |h: &[f64]| {
        let diff_sq: f64 = v.iter().zip(h).map(|(a, b)| (a - b) * (a - b)).sum();
        diff_sq - dot(h, h)
    };
    let cos = |h: &[f64]| dot(v, h) / (v_norm * norm(h));
    let unit_l2 = |h: &[f64]| {
        let hn = norm(h);
        v.iter()
            .zip(h)
            .map(|(a, b)| (a / v_norm - b / hn).powi(2))
            .sum::<f64>()
    };

    Ok(AlignmentArgOptima {
        argmax_ip: argmax_by(&ip),
        argmin_shifted_l2: argmin_by(&shifted),
        argmax_cos: argmax_by(&cos),
        argmin_unit_l2: argmin_by(&unit_l2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapley_formula() {
        assert_eq!(shapley_first_order(1.0, 2.0, 0.1), -0.2);
        assert_eq!(shapley_first_order(0.0, 5.0, 0.1), 0.0);
    }

    #[test]
    fn shapley_matches_finite_difference_on_linear_model() {
        // One parameter θ, validation loss l(θ) = c·θ. A step θ ← θ − lr·w·g
        // changes the loss by −lr·w·g·c; the alignment is b = c·g.
        let c = 1.7;
        let g = -0.6;
        let (w, lr) = (0.8, 1e-4);
        let predicted = shapley_first_order(w, c * g, lr);
        let theta = 0.3;
        let loss = |th: f64| c * th;
        let actual = loss(theta - lr * w * g) - loss(theta);
        assert!((predicted - actual).abs() < 1e-5);
    }

    #[test]
    fn second_order_zero_weights_zero_utility() {
        let sys = GramSystem {
            gram: Mat::identity(3),
            align: vec![1.0, 2.0, 3.0],
            lambda: 0.0,
            target_sq_norm: 14.0,
        };
        assert_eq!(second_order_utility(&sys, &[0.0; 3], 0.1).unwrap(), 0.0);
    }

    #[test]
    fn second_order_matches_objective_identity() {
        // objective − ‖t‖² = 2·U at lr = 1, λ = 0.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = 4;
            let m = Mat::from_fn(n + 1, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let sys = GramSystem {
                gram: m.t_matmul(&m),
                align: (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(),
                lambda: 0.0,
                target_sq_norm: rng.random::<f64>() * 5.0,
            };
            let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let obj = crate::selector::gram::objective_value(&sys, &w).unwrap();
            let util = second_order_utility(&sys, &w, 1.0).unwrap();
            let lhs = obj - sys.target_sq_norm;
            assert!((lhs - 2.0 * util).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn second_order_scaling_in_lr() {
        let sys = GramSystem {
            gram: Mat::identity(2),
            align: vec![1.0, -0.5],
            lambda: 0.0,
            target_sq_norm: 0.0,
        };
        let w = [0.3, 0.7];
        let u1 = second_order_utility(&sys, &w, 0.1).unwrap();
        let u2 = second_order_utility(&sys, &w, 0.2).unwrap();
        let cross = 0.3 * 1.0 + 0.7 * (-0.5);
        let quad = 0.3f64.powi(2) + 0.7f64.powi(2);
        assert!((u1 - (-0.1 * cross + 0.005 * quad)).abs() < 1e-15);
        assert!((u2 - (-0.2 * cross + 0.02 * quad)).abs() < 1e-15);
    }

    #[test]
    fn sign_case_picks_v_over_minus_v() {
        let v = vec![1.0, 2.0];
        let cands = vec![v.clone(), v.iter().map(|x| -x).collect()];
        let opt = alignment_l2_check(&v, &cands).unwrap();
        assert_eq!(opt.argmax_ip, 0);
        assert_eq!(opt.argmax_cos, 0);
        assert_eq!(opt.argmin_shifted_l2, 0);
        assert_eq!(opt.argmin_unit_l2, 0);
    }

    #[test]
    fn scale_vs_direction() {
        // {2v, v/2}: cosine ties (lowest index), inner product picks 2v.
        let v = vec![0.5, -1.5, 2.0];
        let cands = vec![
            v.iter().map(|x| 2.0 * x).collect::<Vec<_>>(),
            v.iter().map(|x| 0.5 * x).collect::<Vec<_>>(),
        ];
        let opt = alignment_l2_check(&v, &cands).unwrap();
        assert_eq!(opt.argmax_ip, 0);
        assert_eq!(opt.argmin_shifted_l2, 0);
        assert_eq!(opt.argmax_cos, 0);
        assert_eq!(opt.argmin_unit_l2, 0);
    }

    #[test]
    fn equivalences_hold_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let d = 8;
            let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let cands: Vec<Vec<f64>> = (0..12)
                .map(|_| (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
                .collect();
            let opt = alignment_l2_check(&v, &cands).unwrap();
            assert_eq!(opt.argmax_ip, opt.argmin_shifted_l2);
            assert_eq!(opt.argmax_cos, opt.argmin_unit_l2);
        }
    }

    #[test]
    fn zero_norm_candidate_rejected() {
        let v = vec![1.0, 0.0];
        let cands = vec![vec![1.0, 1.0], vec![0.0, 0.0]];
        assert!(alignment_l2_check(&v, &cands).is_err());
    }
}
