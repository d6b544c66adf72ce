//! Deterministic online fine-tuning simulator on synthetic corpora.

pub mod corpus;
pub mod io;
pub mod model;
pub mod run;

pub use corpus::{
    gen_corpus, Corpus, CorpusSpec, LabelKind, NoiseParams, Quality, QualityMix, Sample, Target,
};
pub use model::{evaluate, Eval, LinearStackModel, LossKind, Nonlinearity};
pub use run::{
    run_online, MetricsRow, ModelSpec, MomentSource, OptimizerKind, OptimizerSpec, PoolSchedule,
    ProjectionConfig, RunConfig, RunResult, SelectionSettings,
};
