//! Property tests for the algebraic invariants: kernel bilinearity,
//! preconditioner bounds, solver feasibility, and selection tie-breaking.

use proptest::prelude::*;

use gradselect::gradcore::{
    inner_ghost, inner_naive, inner_reordered, val_aggregate, FactorPair, ProjectedSample,
    SampleGradient,
};
use gradselect::linalg::Mat;
use gradselect::optstate::{linearized_preconditioner, ProjectedMoment};
use gradselect::selector::{kkt_scale, nnls_solve, topk_select, GramSystem};

fn factor_strategy(d1: usize, d2: usize, t: usize) -> impl Strategy<Value = FactorPair> {
    (
        proptest::collection::vec(-2.0f64..2.0, d1 * t),
        proptest::collection::vec(-2.0f64..2.0, d2 * t),
    )
        .prop_map(move |(a, g)| {
            FactorPair::new(0, Mat::from_vec(d1, t, a), Mat::from_vec(d2, t, g)).unwrap()
        })
}

fn sample_strategy(d1: usize, d2: usize, t: usize) -> impl Strategy<Value = SampleGradient> {
    factor_strategy(d1, d2, t).prop_map(|f| SampleGradient::new(0, vec![f]).unwrap())
}

fn scale_sample(s: &SampleGradient, alpha: f64) -> SampleGradient {
    // Scaling one factor scales the implied gradient linearly.
    let layers = s
        .layers
        .iter()
        .map(|f| {
            FactorPair::new(f.layer_id, f.activations.scale(alpha), f.out_grads.clone()).unwrap()
        })
        .collect();
    SampleGradient::new(s.sample_id, layers).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernels_are_bilinear(
        x in sample_strategy(4, 3, 2),
        y in sample_strategy(4, 3, 2),
        alpha in -3.0f64..3.0,
    ) {
        let naive = inner_naive(&x, &y).unwrap();
        let ghost = inner_ghost(&x, &y).unwrap();
        let scaled = scale_sample(&x, alpha);
        let naive_scaled = inner_naive(&scaled, &y).unwrap();
        let ghost_scaled = inner_ghost(&scaled, &y).unwrap();
        prop_assert!((naive_scaled - alpha * naive).abs() <= 1e-9 * (1.0 + naive.abs() * alpha.abs()));
        prop_assert!((ghost_scaled - alpha * ghost).abs() <= 1e-9 * (1.0 + ghost.abs() * alpha.abs()));
    }

    #[test]
    fn reordered_is_additive_over_validation_batches(
        x in sample_strategy(3, 3, 2),
        v1 in sample_strategy(3, 3, 2),
        v2 in sample_strategy(3, 3, 2),
    ) {
        let xp = ProjectedSample { sample_id: 0, layers: x.layers.clone() };
        let p1 = ProjectedSample { sample_id: 1, layers: v1.layers.clone() };
        let p2 = ProjectedSample { sample_id: 2, layers: v2.layers.clone() };
        let both = val_aggregate(&[p1.clone(), p2.clone()]).unwrap();
        let first = val_aggregate(std::slice::from_ref(&p1)).unwrap();
        let second = val_aggregate(std::slice::from_ref(&p2)).unwrap();
        let joint = inner_reordered(&xp, &both).unwrap();
        let split = inner_reordered(&xp, &first).unwrap() + inner_reordered(&xp, &second).unwrap();
        prop_assert!((joint - split).abs() <= 1e-9 * (1.0 + joint.abs()));
    }

    #[test]
    fn preconditioner_entries_bounded_by_inverse_eps(
        values in proptest::collection::vec(0.0f64..10.0, 6),
        steps in 1u64..30,
    ) {
        let eps = 1e-4;
        let mut pm = ProjectedMoment::new(&[(2, 3)], 0.99, eps).unwrap();
        for _ in 0..steps {
            pm.update(&[Mat::from_vec(2, 3, values.clone())]).unwrap();
        }
        let d = linearized_preconditioner(&pm, 0.9).unwrap();
        for &v in d.per_layer[0].as_slice() {
            prop_assert!(v > 0.0);
            prop_assert!(v <= 1.0 / eps + 1e-9);
        }
    }

    #[test]
    fn nnls_is_feasible_and_kkt_on_arbitrary_systems(
        entries in proptest::collection::vec(-1.0f64..1.0, 5 * 7),
        align in proptest::collection::vec(-2.0f64..2.0, 5),
        lambda in 0.0f64..0.5,
    ) {
        let m = Mat::from_vec(7, 5, entries);
        let sys = GramSystem {
            gram: m.t_matmul(&m),
            align,
            lambda,
            target_sq_norm: 1.0,
        };
        let subset: Vec<usize> = (0..5).collect();
        let w = nnls_solve(&sys, &subset).unwrap();
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        let scale = kkt_scale(&sys, &subset);
        for (a, &i) in subset.iter().enumerate() {
            let mut grad = -sys.align[i] + sys.lambda * w[a];
            for (b, &j) in subset.iter().enumerate() {
                grad += sys.gram.at(i, j) * w[b];
            }
            if w[a] > 0.0 {
                prop_assert!(grad.abs() <= 1e-8 * scale);
            } else {
                prop_assert!(grad >= -1e-8 * scale);
            }
        }
    }

    #[test]
    fn topk_is_scale_invariant_and_within_range(
        scores in proptest::collection::vec(-5.0f64..5.0, 3..12),
        c in 0.1f64..10.0,
    ) {
        let budget = scores.len() / 2 + 1;
        let base = topk_select(&scores, budget).unwrap();
        prop_assert_eq!(base.len(), budget);
        prop_assert!(base.iter().all(|&i| i < scores.len()));
        let scaled: Vec<f64> = scores.iter().map(|s| s * c).collect();
        let rescored = topk_select(&scaled, budget).unwrap();
        prop_assert_eq!(base, rescored);
    }
}
