//! Leading-order operation and storage counts for the three kernels.
//!
//! These are the analytic costs the harness benchmark checks measured wall
//! times against. `reordered` also has a symmetric evaluation order; see
//! [`preferred_reordering`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Naive,
    Ghost,
    Reordered,
}

impl KernelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            KernelKind::Naive => "naive",
            KernelKind::Ghost => "ghost",
            KernelKind::Reordered => "reordered",
        }
    }
}

/// Problem dimensions for one scoring step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Tracked layers.
    pub l: usize,
    /// Sequence length.
    pub t: usize,
    /// Candidate batch size.
    pub b_tr: usize,
    /// Validation batch size.
    pub b_val: usize,
    /// Activation dimension.
    pub d1: usize,
    /// Output-gradient dimension.
    pub d2: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cost {
    pub time_ops: u128,
    pub space_units: u128,
}

/// Which contraction order of the reordered kernel is cheaper for these dims.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReorderSide {
    /// Aggregate Σ â ĝᵀ, contract activations first (the default form).
    ActivationFirst,
    /// The symmetric variant that contracts output gradients first.
    GradientFirst,
}

pub fn cost_model(kernel: KernelKind, dims: Dims) -> Result<Cost> {
    let Dims {
        l,
        t,
        b_tr,
        b_val,
        d1,
        d2,
    } = dims;
    if l == 0 || t == 0 || b_tr == 0 || b_val == 0 || d1 == 0 || d2 == 0 {
        return Err(Error::InvalidArgument("all dims must be positive".into()));
    }
    let (l, t, b_tr, b_val, d1, d2) = (
        l as u128,
        t as u128,
        b_tr as u128,
        b_val as u128,
        d1 as u128,
        d2 as u128,
    );
    let cost = match kernel {
        KernelKind::Naive => Cost {
            time_ops: l * t * t * b_tr * b_val * d1 * d2,
            space_units: l * b_tr * b_val * d1 * d2,
        },
        KernelKind::Ghost => Cost {
            time_ops: l * t * t * b_tr * b_val * (d1 + d2),
            space_units: l * t * (b_tr + b_val) * d1 + t * t * b_tr * b_val,
        },
        KernelKind::Reordered => Cost {
            time_ops: l * t * b_tr * d2 * (b_val * d1 + t),
            space_units: l * t * (b_tr + b_val) * d1 + b_tr * d2 * d1.max(t),
        },
    };
    Ok(cost)
}

/// Cost of the symmetric reordered variant (roles of d1 and d2 swapped).
pub fn reordered_symmetric_cost(dims: Dims) -> Result<Cost> {
    let swapped = Dims {
        d1: dims.d2,
        d2: dims.d1,
        ..dims
    };
    cost_model(KernelKind::Reordered, swapped)
}

/// Pick the cheaper reordered evaluation order for these dims; ties go to
/// the default activation-first form.
pub fn preferred_reordering(dims: Dims) -> Result<ReorderSide> {
    let default = cost_model(KernelKind::Reordered, dims)?;
    let symmetric = reordered_symmetric_cost(dims)?;
    if symmetric.time_ops < default.time_ops {
        Ok(ReorderSide::GradientFirst)
    } else {
        Ok(ReorderSide::ActivationFirst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: Dims = Dims {
        l: 1,
        t: 1,
        b_tr: 1,
        b_val: 1,
        d1: 1,
        d2: 1,
    };

    #[test]
    fn unit_dims_cost_one() {
        assert_eq!(cost_model(KernelKind::Naive, UNIT).unwrap().time_ops, 1);
    }

    #[test]
    fn ghost_to_naive_time_ratio() {
        let dims = Dims {
            l: 2,
            t: 3,
            b_tr: 4,
            b_val: 5,
            d1: 8,
            d2: 16,
        };
        let naive = cost_model(KernelKind::Naive, dims).unwrap().time_ops as f64;
        let ghost = cost_model(KernelKind::Ghost, dims).unwrap().time_ops as f64;
        let expected = (dims.d1 + dims.d2) as f64 / (dims.d1 * dims.d2) as f64;
        assert!((ghost / naive - expected).abs() < 1e-12);
    }

    #[test]
    fn doubling_t_quadruples_naive_but_not_reordered() {
        let dims = Dims {
            l: 1,
            t: 4,
            b_tr: 4,
            b_val: 8,
            d1: 16,
            d2: 16,
        };
        let doubled = Dims { t: 8, ..dims };
        // B_val·d1 > T here, so the reordered growth stays below quadratic.
        assert!(dims.b_val * dims.d1 > dims.t);
        let n1 = cost_model(KernelKind::Naive, dims).unwrap().time_ops;
        let n2 = cost_model(KernelKind::Naive, doubled).unwrap().time_ops;
        assert_eq!(n2, 4 * n1);
        let r1 = cost_model(KernelKind::Reordered, dims).unwrap().time_ops as f64;
        let r2 = cost_model(KernelKind::Reordered, doubled).unwrap().time_ops as f64;
        assert!(r2 / r1 < 4.0);
        assert!(r2 / r1 >= 2.0);
    }

    #[test]
    fn monotone_in_every_dimension() {
        let base = Dims {
            l: 2,
            t: 3,
            b_tr: 4,
            b_val: 5,
            d1: 6,
            d2: 7,
        };
        let bumps = [
            Dims { l: 3, ..base },
            Dims { t: 4, ..base },
            Dims { b_tr: 5, ..base },
            Dims { b_val: 6, ..base },
            Dims { d1: 7, ..base },
            Dims { d2: 8, ..base },
        ];
        for kernel in [KernelKind::Naive, KernelKind::Ghost, KernelKind::Reordered] {
            let c0 = cost_model(kernel, base).unwrap();
            for bumped in bumps {
                let c1 = cost_model(kernel, bumped).unwrap();
                assert!(c1.time_ops > c0.time_ops, "{kernel:?} time not monotone");
                assert!(
                    c1.space_units >= c0.space_units,
                    "{kernel:?} space not monotone"
                );
            }
        }
    }

    #[test]
    fn zero_dims_rejected() {
        let dims = Dims { l: 0, ..UNIT };
        assert!(cost_model(KernelKind::Naive, dims).is_err());
    }

    #[test]
    fn reordering_choice_follows_cost() {
        // d2 ≫ d1 makes the gradient-first order cheaper.
        let dims = Dims {
            l: 1,
            t: 16,
            b_tr: 4,
            b_val: 4,
            d1: 2,
            d2: 64,
        };
        assert_eq!(
            preferred_reordering(dims).unwrap(),
            ReorderSide::GradientFirst
        );
        let dims = Dims {
            l: 1,
            t: 16,
            b_tr: 4,
            b_val: 4,
            d1: 64,
            d2: 2,
        };
        assert_eq!(
            preferred_reordering(dims).unwrap(),
            ReorderSide::ActivationFirst
        );
        // Symmetric dims tie and keep the default form.
        let dims = Dims {
            l: 1,
            t: 16,
            b_tr: 4,
            b_val: 4,
            d1: 8,
            d2: 8,
        };
        assert_eq!(
            preferred_reordering(dims).unwrap(),
            ReorderSide::ActivationFirst
        );
    }
}
