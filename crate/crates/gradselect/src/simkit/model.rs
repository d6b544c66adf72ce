//! A small stack of linear layers with per-sample factor capture.
//!
//! The forward pass keeps every layer input and pre-activation so the
//! backward pass can hand out exactly the (a, g) factor pairs whose outer
//! product is the true per-sample weight gradient.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradcore::{FactorPair, SampleGradient};
use crate::linalg::Mat;
use crate::simkit::corpus::{Sample, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    SoftmaxCe,
    SquaredError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Identity,
    #[default]
    Tanh,
}

impl Nonlinearity {
    fn apply(&self, m: &Mat) -> Mat {
        match self {
            Nonlinearity::Identity => m.clone(),
            Nonlinearity::Tanh => m.map(f64::tanh),
        }
    }

    /// φ'(s) expressed through the activation value a = φ(s).
    fn derivative_from_output(&self, a: &Mat) -> Mat {
        match self {
            Nonlinearity::Identity => Mat::from_fn(a.rows(), a.cols(), |_, _| 1.0),
            Nonlinearity::Tanh => a.map(|v| 1.0 - v * v),
        }
    }
}

/// Stack of linear layers W_ℓ (d_in × d_out) with the configured
/// nonlinearity between layers (never after the last).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStackModel {
    pub weights: Vec<Mat>,
    pub nonlinearity: Nonlinearity,
    pub loss: LossKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eval {
    pub loss: f64,
    pub accuracy: f64,
}

impl LinearStackModel {
    /// Random init with 1/√d_in scaling across the dim chain
    /// `[d0, hidden.., out]`.
    pub fn new_random(
        dims: &[usize],
        loss: LossKind,
        nonlinearity: Nonlinearity,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidArgument(
                "model needs at least one layer".into(),
            ));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidArgument("model dims must be positive".into()));
        }
        let weights = dims
            .windows(2)
            .map(|w| {
                let scale = 1.0 / (w[0] as f64).sqrt();
                Mat::from_fn(w[0], w[1], |_, _| {
                    let z: f64 = StandardNormal.sample(rng);
                    z * scale
                })
            })
            .collect();
        Ok(LinearStackModel {
            weights,
            nonlinearity,
            loss,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().expect("at least one layer").cols()
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.rows() * w.cols()).sum()
    }

    /// (layer_id, d1, d2) triples for building a projection spec.
    pub fn projection_shapes(&self) -> Vec<(usize, usize, usize)> {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| (i, w.rows(), w.cols()))
            .collect()
    }

    /// Logits (output_dim × T) for the raw input features.
    pub fn forward(&self, tokens: &Mat) -> Result<Mat> {
        if tokens.rows() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} features, model expects {}",
                tokens.rows(),
                self.input_dim()
            )));
        }
        let mut h = tokens.clone();
        for (i, w) in self.weights.iter().enumerate() {
            let s = w.t_matmul(&h);
            h = if i + 1 < self.weights.len() {
                self.nonlinearity.apply(&s)
            } else {
                s
            };
        }
        Ok(h)
    }

    fn loss_and_out_grad(&self, logits: &Mat, target: &Target) -> Result<(f64, Mat)> {
        let (c, t) = logits.shape();
        match (self.loss, target) {
            (LossKind::SoftmaxCe, Target::Classes(labels)) => {
                if labels.len() != t {
                    return Err(Error::ShapeMismatch(format!(
                        "{} labels for {t} positions",
                        labels.len()
                    )));
                }
                let mut loss = 0.0;
                let mut g = Mat::zeros(c, t);
                for pos in 0..t {
                    let y = labels[pos];
                    if y >= c {
                        return Err(Error::InvalidArgument(format!(
                            "label {y} out of range for {c} classes"
                        )));
                    }
                    let mut maxv = f64::NEG_INFINITY;
                    for i in 0..c {
                        maxv = maxv.max(logits.at(i, pos));
                    }
                    let mut z = 0.0;
                    for i in 0..c {
                        z += (logits.at(i, pos) - maxv).exp();
                    }
                    loss += z.ln() + maxv - logits.at(y, pos);
                    for i in 0..c {
                        let p = (logits.at(i, pos) - maxv).exp() / z;
                        *g.at_mut(i, pos) = p - if i == y { 1.0 } else { 0.0 };
                    }
                }
                Ok((loss, g))
            }
            (LossKind::SquaredError, Target::Values(y)) => {
                if y.shape() != logits.shape() {
                    return Err(Error::ShapeMismatch(format!(
                        "target is {:?}, logits are {:?}",
                        y.shape(),
                        logits.shape()
                    )));
                }
                let mut loss = 0.0;
                let mut g = Mat::zeros(c, t);
                for i in 0..c {
                    for pos in 0..t {
                        let diff = logits.at(i, pos) - y.at(i, pos);
                        loss += 0.5 * diff * diff;
                        *g.at_mut(i, pos) = diff;
                    }
                }
                Ok((loss, g))
            }
            _ => Err(Error::InvalidArgument(
                "loss kind does not match the sample's target kind".into(),
            )),
        }
    }

    /// Per-sample loss and factor pairs. The factors satisfy
    /// `factor_outer() = ∂loss/∂W_ℓ` (d_in × d_out) exactly.
    pub fn per_sample_backward(&self, sample: &Sample) -> Result<(SampleGradient, f64)> {
        if !sample.tokens.is_finite() {
            return Err(Error::NonFinite("sample tokens"));
        }
        let n = self.weights.len();
        // Forward, keeping layer inputs and post-nonlinearity outputs.
        let mut inputs: Vec<Mat> = Vec::with_capacity(n);
        let mut h = sample.tokens.clone();
        for (i, w) in self.weights.iter().enumerate() {
            if h.rows() != w.rows() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i}: input has {} rows, weight expects {}",
                    h.rows(),
                    w.rows()
                )));
            }
            inputs.push(h.clone());
            let s = w.t_matmul(&h);
            if !s.is_finite() {
                return Err(Error::NonFinite("layer activations"));
            }
            h = if i + 1 < n {
                self.nonlinearity.apply(&s)
            } else {
                s
            };
        }
        let (loss, mut g) = self.loss_and_out_grad(&h, &sample.target)?;

        // Backward through the stack; g holds dL/ds for the current layer.
        let mut factors: Vec<FactorPair> = Vec::with_capacity(n);
        for layer in (0..n).rev() {
            factors.push(FactorPair::new(layer, inputs[layer].clone(), g.clone())?);
            if layer > 0 {
                let upstream = self.weights[layer].matmul(&g); // d_in(layer) × T
                let phi_prime = self.nonlinearity.derivative_from_output(&inputs[layer]);
                g = upstream.hadamard(&phi_prime);
            }
        }
        factors.reverse();
        Ok((SampleGradient::new(sample.id, factors)?, loss))
    }

    /// Apply per-layer parameter deltas (d_in × d_out each).
    pub fn apply_delta(&mut self, deltas: &[Mat]) -> Result<()> {
        if deltas.len() != self.weights.len() {
            return Err(Error::ShapeMismatch("delta layer count mismatch".into()));
        }
        for (w, d) in self.weights.iter_mut().zip(deltas) {
            if w.shape() != d.shape() {
                return Err(Error::ShapeMismatch("delta shape mismatch".into()));
            }
            w.add_scaled(d, 1.0);
        }
        Ok(())
    }

    /// Flatten per-layer matrices into one parameter-space vector.
    pub fn flatten(mats: &[Mat]) -> Vec<f64> {
        let mut out = Vec::with_capacity(mats.iter().map(|m| m.as_slice().len()).sum());
        for m in mats {
            out.extend_from_slice(m.as_slice());
        }
        out
    }

    /// Inverse of [`flatten`] against this model's layer shapes.
    pub fn unflatten(&self, flat: &[f64]) -> Result<Vec<Mat>> {
        if flat.len() != self.param_count() {
            return Err(Error::ShapeMismatch(
                "flat parameter length mismatch".into(),
            ));
        }
        let mut out = Vec::with_capacity(self.weights.len());
        let mut offset = 0;
        for w in &self.weights {
            let len = w.rows() * w.cols();
            out.push(Mat::from_vec(
                w.rows(),
                w.cols(),
                flat[offset..offset + len].to_vec(),
            ));
            offset += len;
        }
        Ok(out)
    }
}

/// Mean loss and argmax accuracy over a sample set. Accuracy is over token
/// positions for classification targets and reported as 0 for regression.
pub fn evaluate(model: &LinearStackModel, samples: &[Sample]) -> Result<Eval> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("evaluate needs a non-empty target set"));
    }
    let mut total_loss = 0.0;
    let mut correct = 0usize;
    let mut positions = 0usize;
    let mut classification = false;
    for s in samples {
        let logits = model.forward(&s.tokens)?;
        let (loss, _) = model.loss_and_out_grad(&logits, &s.target)?;
        total_loss += loss;
        if let Target::Classes(labels) = &s.target {
            classification = true;
            for (pos, &y) in labels.iter().enumerate() {
                let mut best = 0;
                for i in 1..logits.rows() {
                    if logits.at(i, pos) > logits.at(best, pos) {
                        best = i;
                    }
                }
                if best == y {
                    correct += 1;
                }
                positions += 1;
            }
        }
    }
    let accuracy = if classification && positions > 0 {
        correct as f64 / positions as f64
    } else {
        0.0
    };
    Ok(Eval {
        loss: total_loss / samples.len() as f64,
        accuracy,
    })
}
