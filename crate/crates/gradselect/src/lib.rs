//! Optimizer-aware online data selection and reweighting for gradient-based
//! training.
//!
//! The crate is organized around the selection pipeline:
//!
//! * [`gradcore`]: factorized per-sample gradients, random-projection
//!   sketches, and the naive/ghost/reordered inner-product kernels with
//!   their cost model.
//! * [`optstate`]: SGD/Adam state, projected second moments, the frozen
//!   diagonal preconditioner, and the adjoint transfer onto the validation
//!   target.
//! * [`selector`]: Gram systems, greedy filtering, OMP, ridge and NNLS
//!   weighting, and the strategy registry.
//! * [`simkit`]: a deterministic online training simulator over synthetic
//!   mixed-quality corpora.
//! * [`harness`]: experiment configs, strategy sweeps, the kernel
//!   benchmark, and the ablation suite behind the `gsel` binary.
//!
//! See the `examples/` directory for one runnable walkthrough per
//! capability.

pub mod error;
pub mod gradcore;
pub mod harness;
pub mod linalg;
pub mod optstate;
pub mod rng;
pub mod selector;
pub mod simkit;

pub use error::{Error, Result};
