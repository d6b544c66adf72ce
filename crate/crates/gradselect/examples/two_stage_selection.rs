//! Filter-then-weight on a hand-built candidate pool.
//!
//! The pool contains target-aligned candidates, a near-duplicate, an
//! adversarial candidate pointing against the target, and pure noise.
//! Greedy filtering picks a diverse aligned backbone; non-negative least
//! squares then zeroes what does not help. Ridge weighting (the unbounded
//! ablation) is shown for contrast, as is coupled OMP.
//!
//! Run: `cargo run --release --example two_stage_selection`

use gradselect::gradcore::{FactorPair, ProjectedSample, ValAggregate};
use gradselect::linalg::Mat;
use gradselect::optstate::{precondition_target, Preconditioner};
use gradselect::selector::{
    build_gram_system, greedy_filter, nnls_solve, objective_on_subset, omp_select, ridge_solve,
    two_stage_select,
};

fn cand(id: usize, g: &[f64]) -> ProjectedSample {
    ProjectedSample {
        sample_id: id,
        layers: vec![FactorPair::new(
            0,
            Mat::from_vec(1, 1, vec![1.0]),
            Mat::from_vec(g.len(), 1, g.to_vec()),
        )
        .unwrap()],
    }
}

fn main() {
    // Target direction in a 4-dimensional gradient space.
    let target = [2.0, 1.0, 0.0, 0.5];
    let pool = vec![
        cand(0, &[1.9, 1.1, 0.1, 0.4]),    // aligned
        cand(1, &[2.0, 0.9, -0.1, 0.6]),   // aligned, near-duplicate of 0
        cand(2, &[0.1, 0.0, 2.0, 0.0]),    // orthogonal filler
        cand(3, &[-2.0, -1.0, 0.0, -0.5]), // adversarial: -target
        cand(4, &[0.0, 0.1, -1.5, 2.0]),   // partial signal
        cand(5, &[0.3, -0.2, 0.4, -0.1]),  // noise
    ];
    let labels = [
        "aligned",
        "near-dup",
        "orthogonal",
        "adversarial",
        "partial",
        "noise",
    ];

    let raw = ValAggregate {
        per_layer: vec![Mat::from_vec(1, target.len(), target.to_vec())],
        count: 1,
        preconditioned: false,
    };
    let identity = Preconditioner::identity(&raw.shapes());
    let pre = precondition_target(&raw, &identity).unwrap();

    let budget = 4;
    let picks = greedy_filter(&pool, &pre, budget).unwrap();
    println!("greedy backbone (selection order):");
    for &p in &picks {
        println!("  {} ({})", p, labels[p]);
    }

    let lambda = 1e-6;
    let sys = build_gram_system(&pool, &raw, &pre, lambda).unwrap();
    let nnls = nnls_solve(&sys, &picks).unwrap();
    let ridge = ridge_solve(&sys, &picks).unwrap();
    println!("\nweights over the backbone:");
    println!("{:>12} {:>10} {:>10}", "candidate", "nnls", "ridge");
    for (i, &p) in picks.iter().enumerate() {
        println!("{:>12} {:>10.4} {:>10.4}", labels[p], nnls[i], ridge[i]);
    }
    println!(
        "\nobjective: nnls {:.6}, ridge {:.6}",
        objective_on_subset(&sys, &picks, &nnls).unwrap(),
        objective_on_subset(&sys, &picks, &ridge).unwrap()
    );

    let outcome = two_stage_select(&pool, &raw, &pre, budget, lambda).unwrap();
    println!(
        "\ntwo_stage_select: indices {:?}, objective {:.6}, residual norm {:.6}",
        outcome.indices, outcome.objective, outcome.residual_norm
    );

    let omp = omp_select(&sys, budget).unwrap();
    println!(
        "omp_select:       indices {:?}, objective {:.6}",
        omp.indices, omp.objective
    );
    println!("\nnnls keeps every weight non-negative; the adversarial candidate can");
    println!("only ever be zeroed, never subtracted.");
}
