//! Seeded random sketching of gradient factors.
//!
//! Each tracked layer gets two independent projection matrices, one for the
//! activation side and one for the output-gradient side, fully determined by
//! (seed, layer_id, side). Inner products survive the sketch with the usual
//! Johnson–Lindenstrauss distortion.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradcore::factor::{FactorPair, ProjectedSample, SampleGradient};
use crate::linalg::Mat;
use crate::rng::mix_seed;

/// Entry distribution for projection matrices. Entries are scaled by 1/√k
/// either way so inner products are preserved in expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionKind {
    Gaussian,
    #[default]
    Rademacher,
}

/// One side's projection: either a dense k×d sketch or an identity bypass.
#[derive(Debug, Clone, PartialEq)]
pub enum SketchMatrix {
    Identity { dim: usize },
    Dense(Mat),
}

impl SketchMatrix {
    pub fn out_dim(&self) -> usize {
        match self {
            SketchMatrix::Identity { dim } => *dim,
            SketchMatrix::Dense(m) => m.rows(),
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            SketchMatrix::Identity { dim } => *dim,
            SketchMatrix::Dense(m) => m.cols(),
        }
    }

    /// Apply to a d×T factor matrix, producing k×T.
    pub fn apply(&self, factor: &Mat) -> Mat {
        match self {
            SketchMatrix::Identity { .. } => factor.clone(),
            SketchMatrix::Dense(r) => r.matmul(factor),
        }
    }
}

/// Per-layer pair of sketches.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerProjection {
    pub layer_id: usize,
    pub r_act: SketchMatrix,
    pub r_grad: SketchMatrix,
}

/// Seeded per-layer sketching matrices for activations and output gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSpec {
    pub seed: u64,
    pub kind: ProjectionKind,
    pub per_layer: Vec<LayerProjection>,
}

fn sample_sketch(rng: &mut ChaCha8Rng, kind: ProjectionKind, k: usize, d: usize) -> Mat {
    let scale = 1.0 / (k as f64).sqrt();
    match kind {
        ProjectionKind::Gaussian => Mat::from_fn(k, d, |_, _| {
            let z: f64 = StandardNormal.sample(rng);
            z * scale
        }),
        ProjectionKind::Rademacher => {
            Mat::from_fn(
                k,
                d,
                |_, _| if rng.random::<bool>() { scale } else { -scale },
            )
        }
    }
}

fn side_matrix(
    seed: u64,
    kind: ProjectionKind,
    layer_id: usize,
    side: u64,
    k: usize,
    d: usize,
) -> SketchMatrix {
    if k >= d {
        // Identity mode: no information to discard, bypass sketching.
        SketchMatrix::Identity { dim: d }
    } else {
        let tag = (layer_id as u64) << 1 | side;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, tag));
        SketchMatrix::Dense(sample_sketch(&mut rng, kind, k, d))
    }
}

use rand::SeedableRng;

impl ProjectionSpec {
    /// Build sketches for layers with the given ids and (d1, d2) shapes,
    /// targeting k1 rows on the activation side and k2 on the gradient side.
    /// A side whose target dimension reaches the input dimension becomes an
    /// identity bypass, so `k1 ≤ d1` and `k2 ≤ d2` always hold.
    pub fn new(
        seed: u64,
        kind: ProjectionKind,
        layers: &[(usize, usize, usize)], // (layer_id, d1, d2)
        k1: usize,
        k2: usize,
    ) -> Result<Self> {
        if k1 == 0 || k2 == 0 {
            return Err(Error::InvalidArgument(
                "projection dims must be >= 1".into(),
            ));
        }
        let per_layer = layers
            .iter()
            .map(|&(layer_id, d1, d2)| LayerProjection {
                layer_id,
                r_act: side_matrix(seed, kind, layer_id, 0, k1.min(d1), d1),
                r_grad: side_matrix(seed, kind, layer_id, 1, k2.min(d2), d2),
            })
            .collect();
        Ok(ProjectionSpec {
            seed,
            kind,
            per_layer,
        })
    }

    /// Identity spec: projected factors equal the raw factors.
    pub fn identity(layers: &[(usize, usize, usize)]) -> Self {
        ProjectionSpec {
            seed: 0,
            kind: ProjectionKind::Rademacher,
            per_layer: layers
                .iter()
                .map(|&(layer_id, d1, d2)| LayerProjection {
                    layer_id,
                    r_act: SketchMatrix::Identity { dim: d1 },
                    r_grad: SketchMatrix::Identity { dim: d2 },
                })
                .collect(),
        }
    }

    /// Per-layer (k1, k2) output shapes.
    pub fn projected_shapes(&self) -> Vec<(usize, usize)> {
        self.per_layer
            .iter()
            .map(|l| (l.r_act.out_dim(), l.r_grad.out_dim()))
            .collect()
    }
}

/// Project one sample's factors through the spec. Deterministic given the
/// spec's seed; errors name the first layer whose shapes disagree.
pub fn project_sample(sample: &SampleGradient, spec: &ProjectionSpec) -> Result<ProjectedSample> {
    if sample.layers.len() != spec.per_layer.len() {
        return Err(Error::Config(format!(
            "projection spec covers {} layers but sample {} has {}",
            spec.per_layer.len(),
            sample.sample_id,
            sample.layers.len()
        )));
    }
    let mut layers = Vec::with_capacity(sample.layers.len());
    for (pair, proj) in sample.layers.iter().zip(&spec.per_layer) {
        if pair.layer_id != proj.layer_id {
            return Err(Error::Config(format!(
                "layer id mismatch: sample has {} where spec expects {}",
                pair.layer_id, proj.layer_id
            )));
        }
        if pair.d1() != proj.r_act.in_dim() || pair.d2() != proj.r_grad.in_dim() {
            return Err(Error::Config(format!(
                "layer {}: spec expects ({}, {}) but sample has ({}, {})",
                pair.layer_id,
                proj.r_act.in_dim(),
                proj.r_grad.in_dim(),
                pair.d1(),
                pair.d2()
            )));
        }
        layers.push(FactorPair {
            layer_id: pair.layer_id,
            activations: proj.r_act.apply(&pair.activations),
            out_grads: proj.r_grad.apply(&pair.out_grads),
        });
    }
    Ok(ProjectedSample {
        sample_id: sample.sample_id,
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use rand::Rng;

    fn sample_with(layer_id: usize, a: Mat, g: Mat) -> SampleGradient {
        SampleGradient::new(0, vec![FactorPair::new(layer_id, a, g).unwrap()]).unwrap()
    }

    #[test]
    fn identity_spec_is_a_noop() {
        let a = Mat::from_fn(4, 3, |i, j| (i + j) as f64);
        let g = Mat::from_fn(2, 3, |i, j| (i * 3 + j) as f64 - 2.0);
        let s = sample_with(0, a.clone(), g.clone());
        let spec = ProjectionSpec::identity(&[(0, 4, 2)]);
        let p = project_sample(&s, &spec).unwrap();
        assert_eq!(p.layers[0].activations, a);
        assert_eq!(p.layers[0].out_grads, g);
    }

    #[test]
    fn zero_activations_project_to_zero() {
        let s = sample_with(
            0,
            Mat::zeros(4, 2),
            Mat::from_fn(3, 2, |i, j| (i + j) as f64),
        );
        let spec = ProjectionSpec::new(7, ProjectionKind::Gaussian, &[(0, 4, 3)], 2, 2).unwrap();
        let p = project_sample(&s, &spec).unwrap();
        assert!(p.layers[0].activations.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_given_seed() {
        let layers = [(0, 16, 8), (3, 8, 4)];
        let s1 = ProjectionSpec::new(99, ProjectionKind::Rademacher, &layers, 4, 4).unwrap();
        let s2 = ProjectionSpec::new(99, ProjectionKind::Rademacher, &layers, 4, 4).unwrap();
        assert_eq!(s1, s2);
        let s3 = ProjectionSpec::new(100, ProjectionKind::Rademacher, &layers, 4, 4).unwrap();
        assert_ne!(s1, s3);
    }

    #[test]
    fn per_layer_matrices_are_independent() {
        let layers = [(0, 8, 8), (1, 8, 8)];
        let spec = ProjectionSpec::new(5, ProjectionKind::Gaussian, &layers, 4, 4).unwrap();
        let (m0, m1) = match (&spec.per_layer[0].r_act, &spec.per_layer[1].r_act) {
            (SketchMatrix::Dense(a), SketchMatrix::Dense(b)) => (a, b),
            _ => panic!("expected dense sketches"),
        };
        assert_ne!(m0, m1);
        // Activation and gradient sides of the same layer differ too.
        let g0 = match &spec.per_layer[0].r_grad {
            SketchMatrix::Dense(m) => m,
            _ => panic!("expected dense sketch"),
        };
        assert_ne!(m0, g0);
    }

    #[test]
    fn shape_mismatch_names_layer() {
        let s = sample_with(2, Mat::zeros(4, 1), Mat::zeros(3, 1));
        let spec = ProjectionSpec::new(7, ProjectionKind::Rademacher, &[(2, 5, 3)], 2, 2).unwrap();
        let err = project_sample(&s, &spec).unwrap_err();
        assert!(err.to_string().contains("layer 2"), "got: {err}");
    }

    #[test]
    fn inner_products_survive_the_sketch_on_average() {
        // Spot check at d=64, k=32; the full JL statistics live in the
        // acceptance suite.
        let mut rng = crate::rng::sub_rng(7, crate::rng::stream::BENCH);
        let d = 64;
        let k = 32;
        let spec = ProjectionSpec::new(7, ProjectionKind::Rademacher, &[(0, d, d)], k, k).unwrap();
        let r = match &spec.per_layer[0].r_act {
            SketchMatrix::Dense(m) => m.clone(),
            _ => panic!(),
        };
        let mut total = 0.0;
        let trials = 200;
        for _ in 0..trials {
            let u = Mat::from_fn(d, 1, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let v = Mat::from_fn(d, 1, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let pu = r.matmul(&u);
            let pv = r.matmul(&v);
            let exact = dot(u.as_slice(), v.as_slice());
            let approx = dot(pu.as_slice(), pv.as_slice());
            let denom =
                dot(u.as_slice(), u.as_slice()).sqrt() * dot(v.as_slice(), v.as_slice()).sqrt();
            total += (approx - exact).abs() / denom;
        }
        assert!(
            total / trials as f64 <= 0.25,
            "mean distortion {}",
            total / trials as f64
        );
    }
}
