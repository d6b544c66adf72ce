//! Weight solvers over a Gram system: unconstrained ridge and non-negative
//! least squares.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, Mat};
use crate::selector::gram::{subset_system, GramSystem};

/// Closed-form ridge weights w = (G_S + λI)⁻¹ b_S. Signs are unconstrained.
pub fn ridge_solve(sys: &GramSystem, subset: &[usize]) -> Result<Vec<f64>> {
    let (g_s, b_s) = subset_system(sys, subset)?;
    solve_regularized(&g_s, &b_s, sys.lambda)
}

fn solve_regularized(g_s: &Mat, b_s: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let k = b_s.len();
    let mut a = g_s.clone();
    for i in 0..k {
        *a.at_mut(i, i) += lambda;
    }
    cholesky_solve(&a, b_s).ok_or_else(|| {
        if lambda == 0.0 {
            Error::Numerical("singular Gram system at lambda = 0; use a positive lambda".into())
        } else {
            Error::Numerical("Gram system is not positive definite".into())
        }
    })
}

/// The scale against which KKT residuals of [`nnls_solve`] are measured.
pub fn kkt_scale(sys: &GramSystem, subset: &[usize]) -> f64 {
    let mut max_b: f64 = 0.0;
    let mut max_diag: f64 = 0.0;
    for &i in subset {
        max_b = max_b.max(sys.align[i].abs());
        max_diag = max_diag.max(sys.gram.at(i, i));
    }
    1.0 + max_b + max_diag + sys.lambda
}

/// Minimize the matching objective over w ≥ 0 restricted to `subset`, by a
/// Lawson–Hanson style active-set sweep on the Gram system.
///
/// At the solution, passive coordinates have |(Gw − b + λw)_i| ≈ 0 and
/// active (zero) coordinates have (Gw − b + λw)_i ≥ 0, both within
/// 1e-8 · [`kkt_scale`].
pub fn nnls_solve(sys: &GramSystem, subset: &[usize]) -> Result<Vec<f64>> {
    let (g_s, b_s) = subset_system(sys, subset)?;
    let lambda = sys.lambda;
    let k = b_s.len();
    let tol = 1e-12 * kkt_scale(sys, subset);

    let mut w = vec![0.0f64; k];
    let mut passive = vec![false; k];
    let max_sweeps = 30 * (k + 2);
    let mut sweeps = 0;

    loop {
        // Dual vector r = b − (G + λI)w; optimal once no inactive coordinate
        // has positive dual.
        let mut best: Option<(usize, f64)> = None;
        for i in 0..k {
            if passive[i] {
                continue;
            }
            let mut r = b_s[i] - lambda * w[i];
            for j in 0..k {
                r -= g_s.at(i, j) * w[j];
            }
            if r > tol && best.is_none_or(|(_, rb)| r > rb) {
                best = Some((i, r));
            }
        }
        let Some((enter, _)) = best else {
            return Ok(w);
        };
        passive[enter] = true;

        // Re-solve on the passive set until the unconstrained solution is
        // feasible, interpolating back and dropping coordinates that hit zero.
        loop {
            sweeps += 1;
            if sweeps > max_sweeps {
                return Err(Error::Numerical(format!(
                    "nnls did not converge in {max_sweeps} active-set updates"
                )));
            }
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let gp = Mat::from_fn(idx.len(), idx.len(), |a, b| g_s.at(idx[a], idx[b]));
            let bp: Vec<f64> = idx.iter().map(|&i| b_s[i]).collect();
            let z = solve_regularized(&gp, &bp, lambda)?;

            if z.iter().all(|&v| v > 0.0) {
                for x in w.iter_mut() {
                    *x = 0.0;
                }
                for (&i, &zi) in idx.iter().zip(&z) {
                    w[i] = zi;
                }
                break;
            }

            // Largest step toward z that keeps w feasible.
            let mut alpha = f64::INFINITY;
            for (&i, &zi) in idx.iter().zip(&z) {
                if zi <= 0.0 {
                    let denom = w[i] - zi;
                    if denom > 0.0 {
                        alpha = alpha.min(w[i] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            let alpha = alpha.clamp(0.0, 1.0);
            for (&i, &zi) in idx.iter().zip(&z) {
                w[i] += alpha * (zi - w[i]);
            }
            let mut dropped = false;
            for (&i, &zi) in idx.iter().zip(&z) {
                if zi <= 0.0 && w[i] <= tol.max(1e-300) {
                    w[i] = 0.0;
                    passive[i] = false;
                    dropped = true;
                }
            }
            if !dropped {
                // Round-off kept every coordinate positive; zero the most
                // negative proposal to guarantee progress.
                let (&worst, _) = idx
                    .iter()
                    .zip(&z)
                    .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap();
                w[worst] = 0.0;
                passive[worst] = false;
            }
        }
    }
}
