//! Factorized per-sample gradients: capture, sketch, and compare.

pub mod container;
pub mod cost;
pub mod factor;
pub mod kernels;
pub mod projection;

pub use cost::{cost_model, preferred_reordering, Cost, Dims, KernelKind, ReorderSide};
pub use factor::{FactorPair, Factorized, ProjectedSample, SampleGradient, ValAggregate};
pub use kernels::{
    inner_ghost, inner_naive, inner_reordered, kfac_second_order_score, val_aggregate,
};
pub use projection::{project_sample, ProjectionKind, ProjectionSpec, SketchMatrix};
