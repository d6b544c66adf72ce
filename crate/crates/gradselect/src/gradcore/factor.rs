//! Factorized per-sample gradient types.
//!
//! A linear layer's per-sample gradient is the outer product of its input
//! activations and the loss gradient at its pre-activations. We keep the two
//! factors and never materialize the product outside of test oracles.

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// One layer's gradient factors for a single sample.
///
/// `activations` is d1×T (layer input per token position), `out_grads` is
/// d2×T (loss gradient w.r.t. the pre-activation per position). The implied
/// full gradient is `out_grads · activationsᵀ`, shape d2×d1.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub layer_id: usize,
    pub activations: Mat,
    pub out_grads: Mat,
}

impl FactorPair {
    pub fn new(layer_id: usize, activations: Mat, out_grads: Mat) -> Result<Self> {
        if activations.cols() != out_grads.cols() {
            return Err(Error::ShapeMismatch(format!(
                "layer {layer_id}: activations have T={} but out_grads have T={}",
                activations.cols(),
                out_grads.cols()
            )));
        }
        if activations.cols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "layer {layer_id}: sequence length must be >= 1"
            )));
        }
        Ok(FactorPair {
            layer_id,
            activations,
            out_grads,
        })
    }

    /// Input dimension d1.
    pub fn d1(&self) -> usize {
        self.activations.rows()
    }

    /// Output dimension d2.
    pub fn d2(&self) -> usize {
        self.out_grads.rows()
    }

    /// Sequence length T.
    pub fn seq_len(&self) -> usize {
        self.activations.cols()
    }

    /// Materialize the full d2×d1 gradient. Test oracles and the parameter
    /// update use this; the scoring kernels never should.
    pub fn materialize(&self) -> Mat {
        self.out_grads.matmul_t(&self.activations)
    }

    /// The d1×d2 outer-product matrix Σ_t a[:,t] g[:,t]ᵀ used by aggregates
    /// and greedy residuals (the transpose of `materialize`).
    pub fn factor_outer(&self) -> Mat {
        self.activations.matmul_t(&self.out_grads)
    }
}

/// All tracked layers' gradient factors for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGradient {
    pub sample_id: usize,
    pub layers: Vec<FactorPair>,
}

impl SampleGradient {
    pub fn new(sample_id: usize, layers: Vec<FactorPair>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[1].layer_id <= pair[0].layer_id {
                return Err(Error::InvalidArgument(format!(
                    "sample {sample_id}: layer ids must be strictly increasing \
                     (got {} then {})",
                    pair[0].layer_id, pair[1].layer_id
                )));
            }
        }
        Ok(SampleGradient { sample_id, layers })
    }
}

/// Projected factors for one sample: per layer, â = R_a·activations (k1×T)
/// and ĝ = R_g·out_grads (k2×T).
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedSample {
    pub sample_id: usize,
    pub layers: Vec<FactorPair>,
}

/// Anything that exposes per-layer (a, g) factors. The scoring kernels are
/// generic over this so raw and projected samples share one code path.
pub trait Factorized {
    fn factor_layers(&self) -> &[FactorPair];
    fn id(&self) -> usize;
}

impl Factorized for SampleGradient {
    fn factor_layers(&self) -> &[FactorPair] {
        &self.layers
    }
    fn id(&self) -> usize {
        self.sample_id
    }
}

impl Factorized for ProjectedSample {
    fn factor_layers(&self) -> &[FactorPair] {
        &self.layers
    }
    fn id(&self) -> usize {
        self.sample_id
    }
}

/// Validation data folded into one reusable k1×k2 matrix per layer.
///
/// Unpreconditioned, `per_layer[ℓ] = Σ_{j∈val} Σ_t â_j[:,t] ĝ_j[:,t]ᵀ`.
/// After `precondition_target` the entries carry the optimizer's diagonal
/// scaling and `preconditioned` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct ValAggregate {
    pub per_layer: Vec<Mat>,
    pub count: usize,
    pub preconditioned: bool,
}

impl ValAggregate {
    /// Zero aggregate with the given per-layer (k1, k2) shapes.
    pub fn zeros(shapes: &[(usize, usize)]) -> Self {
        ValAggregate {
            per_layer: shapes.iter().map(|&(k1, k2)| Mat::zeros(k1, k2)).collect(),
            count: 0,
            preconditioned: false,
        }
    }

    /// Scale every layer matrix by `s` (e.g. 1/count to turn the sum into the
    /// batch-mean target). Count and flag are preserved.
    pub fn scaled(&self, s: f64) -> Self {
        ValAggregate {
            per_layer: self.per_layer.iter().map(|m| m.scale(s)).collect(),
            count: self.count,
            preconditioned: self.preconditioned,
        }
    }

    /// Squared Frobenius norm summed over layers.
    pub fn frob_norm_sq(&self) -> f64 {
        self.per_layer.iter().map(|m| m.frob_norm_sq()).sum()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.per_layer.iter().map(|m| m.shape()).collect()
    }
}

/// Check that two factorized samples have compatible per-layer dimensions
/// (same layer count, ids, d1 and d2; sequence lengths may differ).
pub(crate) fn check_layer_compat(x: &[FactorPair], y: &[FactorPair]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "layer count mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    for (a, b) in x.iter().zip(y) {
        if a.layer_id != b.layer_id {
            return Err(Error::ShapeMismatch(format!(
                "layer id mismatch: {} vs {}",
                a.layer_id, b.layer_id
            )));
        }
        if a.d1() != b.d1() || a.d2() != b.d2() {
            return Err(Error::ShapeMismatch(format!(
                "layer {}: dims ({}, {}) vs ({}, {})",
                a.layer_id,
                a.d1(),
                a.d2(),
                b.d1(),
                b.d2()
            )));
        }
    }
    Ok(())
}
