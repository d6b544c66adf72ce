//! Second moments of projected batch gradients and the frozen diagonal
//! preconditioner they induce.
//!
//! Selection at step t uses the moment state accumulated through step t−1,
//! so the preconditioner is a fixed linear map during scoring. The first
//! moment never enters: its decay folds into the scalar (1−β1)/(1−β1ᵗ),
//! which is kept so objective values match the closed formula even though it
//! cannot change any argmax.

use crate::error::{Error, Result};
use crate::gradcore::ValAggregate;
use crate::linalg::Mat;

/// Per-layer second moments of the projected batch gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedMoment {
    pub per_layer: Vec<Mat>,
    pub t: u64,
    pub beta2: f64,
    pub eps: f64,
}

impl ProjectedMoment {
    pub fn new(shapes: &[(usize, usize)], beta2: f64, eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta2) {
            return Err(Error::InvalidArgument("beta2 must be in [0, 1)".into()));
        }
        if eps <= 0.0 {
            return Err(Error::InvalidArgument("eps must be positive".into()));
        }
        Ok(ProjectedMoment {
            per_layer: shapes.iter().map(|&(k1, k2)| Mat::zeros(k1, k2)).collect(),
            t: 0,
            beta2,
            eps,
        })
    }

    /// V ← β2·V + (1−β2)·g², elementwise over the per-layer batch-gradient
    /// matrices; advances the step counter.
    pub fn update(&mut self, batch_grad: &[Mat]) -> Result<()> {
        if batch_grad.len() != self.per_layer.len() {
            return Err(Error::ShapeMismatch(format!(
                "batch gradient has {} layers, moment state has {}",
                batch_grad.len(),
                self.per_layer.len()
            )));
        }
        for (v, g) in self.per_layer.iter_mut().zip(batch_grad) {
            if v.shape() != g.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "moment is {:?} but gradient is {:?}",
                    v.shape(),
                    g.shape()
                )));
            }
        }
        let beta2 = self.beta2;
        for (v, g) in self.per_layer.iter_mut().zip(batch_grad) {
            for (vi, gi) in v.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
            }
        }
        self.t += 1;
        Ok(())
    }
}

/// Frozen diagonal preconditioner, one positive matrix per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Preconditioner {
    pub per_layer: Vec<Mat>,
    pub source_step: u64,
}

impl Preconditioner {
    /// All-ones preconditioner (SGD, or any raw-alignment variant).
    pub fn identity(shapes: &[(usize, usize)]) -> Self {
        Preconditioner {
            per_layer: shapes
                .iter()
                .map(|&(k1, k2)| Mat::from_fn(k1, k2, |_, _| 1.0))
                .collect(),
            source_step: 0,
        }
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.per_layer.iter().map(|m| m.shape()).collect()
    }
}

/// D = (1−β1) / ((1−β1ᵗ)(√v̂ + ε)) with v̂ = V/(1−β2ᵗ), elementwise.
///
/// A fresh state (t = 0) uses the t = 1 form with V = 0, i.e. a uniform 1/ε:
/// the first selection step then ranks by raw alignment up to a global scale.
pub fn linearized_preconditioner(pm: &ProjectedMoment, beta1: f64) -> Result<Preconditioner> {
    linearized_preconditioner_damped(pm, beta1, 0.0)
}

/// [`linearized_preconditioner`] with `damping · mean(√v̂)` added to the
/// denominator, bounding the amplification of low-variance coordinates.
/// Zero damping reproduces the plain formula.
pub fn linearized_preconditioner_damped(
    pm: &ProjectedMoment,
    beta1: f64,
    damping: f64,
) -> Result<Preconditioner> {
    if !(0.0..1.0).contains(&beta1) {
        return Err(Error::InvalidArgument("beta1 must be in [0, 1)".into()));
    }
    if damping.is_nan() || damping < 0.0 {
        return Err(Error::InvalidArgument("damping must be >= 0".into()));
    }
    let t = pm.t.max(1);
    let scalar = (1.0 - beta1) / (1.0 - beta1.powi(t as i32));
    let bc2 = 1.0 - pm.beta2.powi(t as i32);
    let eps = pm.eps;
    let mut floor = 0.0;
    if damping > 0.0 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for v in &pm.per_layer {
            sum += v.as_slice().iter().map(|vi| (vi / bc2).sqrt()).sum::<f64>();
            count += v.as_slice().len();
        }
        floor = damping * sum / count.max(1) as f64;
    }
    let per_layer = pm
        .per_layer
        .iter()
        .map(|v| v.map(|vi| scalar / ((vi / bc2).sqrt() + eps + floor)))
        .collect();
    Ok(Preconditioner {
        per_layer,
        source_step: pm.t,
    })
}

/// M̃_ℓ = D_ℓ ⊙ M_ℓ. Moving the diagonal scaling onto the validation target
/// is exact for inner products: ⟨∇l_val, D⊙∇l_tr⟩ = ⟨D⊙∇l_val, ∇l_tr⟩.
pub fn precondition_target(agg: &ValAggregate, d: &Preconditioner) -> Result<ValAggregate> {
    if agg.preconditioned {
        return Err(Error::InvalidArgument(
            "aggregate is already preconditioned".into(),
        ));
    }
    if agg.per_layer.len() != d.per_layer.len() {
        return Err(Error::ShapeMismatch(format!(
            "aggregate has {} layers, preconditioner has {}",
            agg.per_layer.len(),
            d.per_layer.len()
        )));
    }
    let mut per_layer = Vec::with_capacity(agg.per_layer.len());
    for (m, dl) in agg.per_layer.iter().zip(&d.per_layer) {
        if m.shape() != dl.shape() {
            return Err(Error::ShapeMismatch(format!(
                "aggregate layer is {:?} but preconditioner layer is {:?}",
                m.shape(),
                dl.shape()
            )));
        }
        per_layer.push(m.hadamard(dl));
    }
    Ok(ValAggregate {
        per_layer,
        count: agg.count,
        preconditioned: true,
    })
}
