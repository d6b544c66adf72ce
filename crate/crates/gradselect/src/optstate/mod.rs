//! Optimizer state in parameter space and projected factor space.
//!
//! The parameter-space Adam/SGD states drive the actual model update; the
//! projected second moments exist only to build the frozen diagonal
//! preconditioner that makes selection optimizer-aware.

pub mod checkpoint;
pub mod projected;

pub use checkpoint::OptimizerCheckpoint;
pub use projected::{
    linearized_preconditioner, linearized_preconditioner_damped, precondition_target,
    Preconditioner, ProjectedMoment,
};

use crate::error::{Error, Result};

/// Adam moments over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(Error::InvalidArgument(
                "beta1 and beta2 must be in [0, 1)".into(),
            ));
        }
        if eps <= 0.0 {
            return Err(Error::InvalidArgument("eps must be positive".into()));
        }
        Ok(AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1,
            beta2,
            eps,
        })
    }
}

/// Plain gradient-descent step: delta = −lr·g.
pub fn sgd_apply(g: &[f64], lr: f64) -> Result<Vec<f64>> {
    if g.iter().any(|v| !v.is_finite()) || !lr.is_finite() {
        return Err(Error::NonFinite("sgd_apply input"));
    }
    Ok(g.iter().map(|v| -lr * v).collect())
}

/// One bias-corrected Adam step. Returns the parameter delta and advances
/// the state's moments and counter.
pub fn adam_update(state: &mut AdamState, g: &[f64], lr: f64) -> Result<Vec<f64>> {
    if g.len() != state.m.len() {
        return Err(Error::ShapeMismatch(format!(
            "gradient has {} entries, state has {}",
            g.len(),
            state.m.len()
        )));
    }
    if g.iter().any(|v| !v.is_finite()) || !lr.is_finite() {
        return Err(Error::NonFinite("adam_update input"));
    }
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    let mut delta = Vec::with_capacity(g.len());
    for i in 0..g.len() {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g[i] * g[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        delta.push(-lr * m_hat / (v_hat.sqrt() + state.eps));
    }
    Ok(delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_is_minus_lr_g() {
        assert_eq!(sgd_apply(&[1.0, -2.0], 0.5).unwrap(), vec![-0.5, 1.0]);
        assert_eq!(sgd_apply(&[0.0, 0.0], 0.3).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn sgd_composes_linearly() {
        let g1 = [0.3, -1.2, 4.0];
        let g2 = [-0.7, 0.1, 2.5];
        let lr = 0.05;
        let twice: Vec<f64> = sgd_apply(&g1, lr)
            .unwrap()
            .iter()
            .zip(sgd_apply(&g2, lr).unwrap())
            .map(|(a, b)| a + b)
            .collect();
        let summed: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
        let once = sgd_apply(&summed, lr).unwrap();
        for (a, b) in twice.iter().zip(&once) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sgd_rejects_non_finite() {
        assert!(sgd_apply(&[f64::NAN], 0.1).is_err());
        assert!(sgd_apply(&[1.0], f64::INFINITY).is_err());
    }

    #[test]
    fn first_adam_step_has_unit_scale() {
        // Fresh state, constant gradient c·1, eps → 0: bias corrections
        // cancel and each coordinate moves by exactly lr.
        for c in [0.3, 1.0, 250.0] {
            let mut state = AdamState::new(4, 0.9, 0.999, 1e-12).unwrap();
            let g = vec![c; 4];
            let delta = adam_update(&mut state, &g, 0.1).unwrap();
            for d in delta {
                assert!((d + 0.1).abs() < 1e-6, "c={c}: delta {d}");
            }
            assert_eq!(state.t, 1);
        }
    }

    #[test]
    fn matches_scalar_reference_over_steps() {
        // Independent scalar recurrence with the textbook constants
        // beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
        let (beta1, beta2, eps, lr, g) = (0.9, 0.999, 1e-8, 0.01, 0.37);
        let mut state = AdamState::new(1, beta1, beta2, eps).unwrap();
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for t in 1..=2 {
            let delta = adam_update(&mut state, &[g], lr).unwrap()[0];
            m = beta1 * m + (1.0 - beta1) * g;
            v = beta2 * v + (1.0 - beta2) * g * g;
            let m_hat = m / (1.0 - beta1.powi(t));
            let v_hat = v / (1.0 - beta2.powi(t));
            let expected = -lr * m_hat / (v_hat.sqrt() + eps);
            assert!((delta - expected).abs() < 1e-12, "step {t}");
        }
    }

    #[test]
    fn adam_with_zero_betas_matches_sgd_signs() {
        let g = [3.0, -0.5, 0.0, -7.0];
        let mut state = AdamState::new(4, 0.0, 0.0, 1e-12).unwrap();
        let adam = adam_update(&mut state, &g, 0.1).unwrap();
        let sgd = sgd_apply(&g, 0.1).unwrap();
        for (a, s) in adam.iter().zip(&sgd) {
            assert_eq!(
                a.signum() * (a.abs() > 1e-9) as i32 as f64,
                s.signum() * (s.abs() > 1e-9) as i32 as f64
            );
        }
    }

    #[test]
    fn adam_rejects_non_finite() {
        let mut state = AdamState::new(1, 0.9, 0.999, 1e-8).unwrap();
        assert!(adam_update(&mut state, &[f64::INFINITY], 0.1).is_err());
    }
}
