//! Gradient inner-product kernels.
//!
//! Three routes to the same number, with very different costs:
//!
//! * `inner_naive` materializes both full per-layer gradients. It is the
//!   reference oracle for everything else.
//! * `inner_ghost` works through T×T token-interaction matrices and never
//!   forms a d2×d1 gradient.
//! * `inner_reordered` folds the whole validation batch into one k1×k2
//!   matrix per layer and contracts each candidate against it, so the cost
//!   of the validation side is paid once per step instead of once per pair.
//!
//! `kfac_second_order_score` is the second-order variant: candidate–target
//! curvature scores through Kronecker-factored statistics, again without
//! materializing anything of size d1·d2.

use crate::error::{Error, Result};
use crate::gradcore::factor::{check_layer_compat, Factorized, ProjectedSample, ValAggregate};
use crate::linalg::frob_inner;

/// Frobenius inner product of the two full gradients, materialized.
pub fn inner_naive<X: Factorized, Y: Factorized>(x: &X, y: &Y) -> Result<f64> {
    let (xl, yl) = (x.factor_layers(), y.factor_layers());
    check_layer_compat(xl, yl)?;
    let mut total = 0.0;
    for (a, b) in xl.iter().zip(yl) {
        total += frob_inner(&a.materialize(), &b.materialize());
    }
    Ok(total)
}

/// Ghost dot-product: ⟨g_yᵀ g_x, a_yᵀ a_x⟩_F per layer, summed.
pub fn inner_ghost<X: Factorized, Y: Factorized>(x: &X, y: &Y) -> Result<f64> {
    let (xl, yl) = (x.factor_layers(), y.factor_layers());
    check_layer_compat(xl, yl)?;
    let mut total = 0.0;
    for (a, b) in xl.iter().zip(yl) {
        let g_inter = b.out_grads.t_matmul(&a.out_grads); // T_y × T_x
        let a_inter = b.activations.t_matmul(&a.activations);
        total += frob_inner(&g_inter, &a_inter);
    }
    Ok(total)
}

/// Fold a validation batch into one reusable k1×k2 matrix per layer:
/// M_ℓ = Σ_j Σ_t â_j[:,t] ĝ_j[:,t]ᵀ.
pub fn val_aggregate(val: &[ProjectedSample]) -> Result<ValAggregate> {
    let first = val
        .first()
        .ok_or(Error::EmptyInput("val_aggregate needs samples"))?;
    let mut per_layer: Vec<_> = first
        .layers
        .iter()
        .map(|l| crate::linalg::Mat::zeros(l.d1(), l.d2()))
        .collect();
    for sample in val {
        check_layer_compat(&first.layers, &sample.layers)?;
        for (acc, pair) in per_layer.iter_mut().zip(&sample.layers) {
            acc.add_scaled(&pair.factor_outer(), 1.0);
        }
    }
    Ok(ValAggregate {
        per_layer,
        count: val.len(),
        preconditioned: false,
    })
}

/// Contract a candidate against an aggregated (possibly preconditioned)
/// target: Σ_ℓ Σ_t â[:,t]ᵀ M_ℓ ĝ[:,t].
///
/// For an unpreconditioned aggregate this equals Σ_{j∈val} inner_ghost(x, j).
pub fn inner_reordered(x: &ProjectedSample, agg: &ValAggregate) -> Result<f64> {
    contract_against(x, &agg.per_layer)
}

/// The contraction behind `inner_reordered`, usable against any dense
/// per-layer target (the greedy filter walks a mutable residual).
pub fn contract_against(x: &ProjectedSample, target: &[crate::linalg::Mat]) -> Result<f64> {
    if x.layers.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "candidate has {} layers, target has {}",
            x.layers.len(),
            target.len()
        )));
    }
    let mut total = 0.0;
    for (pair, m) in x.layers.iter().zip(target) {
        if pair.d1() != m.rows() || pair.d2() != m.cols() {
            return Err(Error::ShapeMismatch(format!(
                "layer {}: factors are ({}, {}) but target is ({}, {})",
                pair.layer_id,
                pair.d1(),
                pair.d2(),
                m.rows(),
                m.cols()
            )));
        }
        // (âᵀ M) is T×k2; its Frobenius product with ĝᵀ finishes the trace.
        let t = pair.seq_len();
        for pos in 0..t {
            let mut acc = 0.0;
            for i in 0..pair.d1() {
                let ai = pair.activations.at(i, pos);
                if ai == 0.0 {
                    continue;
                }
                let mrow = m.row(i);
                let mut inner = 0.0;
                for (o, &mv) in mrow.iter().enumerate() {
                    inner += mv * pair.out_grads.at(o, pos);
                }
                acc += ai * inner;
            }
            total += acc;
        }
    }
    Ok(total)
}

/// Second-order candidate score through Kronecker-factored validation
/// curvature, evaluated in factor space:
///
/// Σ_ℓ Σ_{k∈cands} (Σ_m ⟨ĝ_x, ĝ_m⟩⟨ĝ_m, ĝ_k⟩) · (Σ_m ⟨â_x, â_m⟩⟨â_m, â_k⟩)
///
/// with all brackets Frobenius inner products over the factor matrices and m
/// ranging over the validation batch. For T=1 this equals the materialized
/// contraction ∇l_xᵀ (G_ℓ ⊗ A_ℓ) Σ_k ∇l_k with G_ℓ = Σ_m g_m g_mᵀ and
/// A_ℓ = Σ_m a_m a_mᵀ.
pub fn kfac_second_order_score(
    x: &ProjectedSample,
    cands: &[ProjectedSample],
    val: &[ProjectedSample],
) -> Result<f64> {
    if val.is_empty() {
        return Err(Error::EmptyInput(
            "kfac_second_order_score needs validation samples",
        ));
    }
    for c in cands {
        check_layer_compat(x.factor_layers(), c.factor_layers())?;
    }
    for m in val {
        check_layer_compat(x.factor_layers(), m.factor_layers())?;
    }
    let n_layers = x.layers.len();
    let mut total = 0.0;
    for layer in 0..n_layers {
        let xg = &x.layers[layer].out_grads;
        let xa = &x.layers[layer].activations;
        // Cache ⟨x, m⟩ per validation sample.
        let xm: Vec<(f64, f64)> = val
            .iter()
            .map(|m| {
                (
                    frob_inner(xg, &m.layers[layer].out_grads),
                    frob_inner(xa, &m.layers[layer].activations),
                )
            })
            .collect();
        for k in cands {
            let kg = &k.layers[layer].out_grads;
            let ka = &k.layers[layer].activations;
            let mut g_term = 0.0;
            let mut a_term = 0.0;
            for (m, &(xg_m, xa_m)) in val.iter().zip(&xm) {
                g_term += xg_m * frob_inner(&m.layers[layer].out_grads, kg);
                a_term += xa_m * frob_inner(&m.layers[layer].activations, ka);
            }
            total += g_term * a_term;
        }
    }
    Ok(total)
}
