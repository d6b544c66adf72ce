//! Sketching gradient factors with seeded random projections.
//!
//! Shows the inner-product distortion of Rademacher and Gaussian sketches
//! at several target dimensions, and the identity bypass when k reaches d.
//!
//! Run: `cargo run --release --example random_projection`

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gradselect::gradcore::{
    project_sample, FactorPair, ProjectionKind, ProjectionSpec, SampleGradient,
};
use gradselect::linalg::{dot, Mat};

fn main() {
    let d = 256;
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    println!("inner-product distortion over 500 random pairs (d = {d}):");
    println!(
        "{:>6} {:>12} {:>14} {:>14}",
        "k", "kind", "mean |err|", "median |err|"
    );
    for &k in &[16usize, 64, 128] {
        for kind in [ProjectionKind::Rademacher, ProjectionKind::Gaussian] {
            let spec = ProjectionSpec::new(3, kind, &[(0, d, d)], k, k).unwrap();
            let sketch = match &spec.per_layer[0].r_act {
                gradselect::gradcore::SketchMatrix::Dense(m) => m.clone(),
                _ => unreachable!("k < d gives a dense sketch"),
            };
            let mut errs: Vec<f64> = (0..500)
                .map(|_| {
                    let u = Mat::from_fn(d, 1, |_, _| rng.random::<f64>() * 2.0 - 1.0);
                    let v = Mat::from_fn(d, 1, |_, _| rng.random::<f64>() * 2.0 - 1.0);
                    let exact = dot(u.as_slice(), v.as_slice());
                    let approx = dot(sketch.matmul(&u).as_slice(), sketch.matmul(&v).as_slice());
                    let denom = dot(u.as_slice(), u.as_slice()).sqrt()
                        * dot(v.as_slice(), v.as_slice()).sqrt();
                    (approx - exact).abs() / denom
                })
                .collect();
            errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mean: f64 = errs.iter().sum::<f64>() / errs.len() as f64;
            println!(
                "{:>6} {:>12?} {:>14.4} {:>14.4}",
                k,
                kind,
                mean,
                errs[errs.len() / 2]
            );
        }
    }

    // Identity bypass: k >= d keeps factors exact.
    let sample = SampleGradient::new(
        0,
        vec![FactorPair::new(
            0,
            Mat::from_fn(8, 2, |i, j| (i + j) as f64),
            Mat::from_fn(4, 2, |i, j| (i * 2 + j) as f64),
        )
        .unwrap()],
    )
    .unwrap();
    let spec = ProjectionSpec::new(3, ProjectionKind::Rademacher, &[(0, 8, 4)], 64, 64).unwrap();
    let projected = project_sample(&sample, &spec).unwrap();
    assert_eq!(
        projected.layers[0].activations,
        sample.layers[0].activations
    );
    println!("\nk >= d falls back to the identity: projected factors are exact.");
}
