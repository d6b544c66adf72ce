//! Candidate selection and reweighting over Gram systems.

pub mod gram;
pub mod greedy;
pub mod omp;
pub mod solvers;
pub mod strategies;
pub mod utility;

pub use gram::{
    build_gram_system, build_gram_with_target, objective_on_subset, objective_value,
    resolve_lambda, GramSystem,
};
pub use greedy::{greedy_filter, greedy_filter_with, topk_select};
pub use omp::omp_select;
pub use solvers::{kkt_scale, nnls_solve, ridge_solve};
pub use strategies::{run_strategy, two_stage_select, SelectionContext, Strategy, ALL_STRATEGIES};
pub use utility::{
    alignment_l2_check, second_order_utility, shapley_first_order, AlignmentArgOptima,
};

/// Result of one selection step: chosen candidate indices (in selection
/// order), their weights, and the matching-objective value they achieve.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub objective: f64,
    pub residual_norm: f64,
}

impl SelectionOutcome {
    /// Indices that actually carry weight (selection-only strategies weight
    /// everything uniformly; NNLS may zero part of the filtered set).
    pub fn trained(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w != 0.0)
            .map(|(&i, &w)| (i, w))
    }

    pub fn has_negative_weight(&self) -> bool {
        self.weights.iter().any(|&w| w < 0.0)
    }
}
