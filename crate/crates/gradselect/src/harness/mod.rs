//! Experiment harness: configs, sweeps, the kernel benchmark and the
//! ablation suite.

pub mod ablate;
pub mod bench;
pub mod config;
pub mod experiment;
pub mod stats;

pub use ablate::{ablation_suite, render_table, AblationOutput, AblationRow, ABLATION_VARIANTS};
pub use bench::{bench_csv, bench_kernels, default_grid, parse_grid_spec, BenchPoint, BenchReport};
pub use config::{ExperimentConfig, StrategyConfig, CONFIG_VERSION};
pub use experiment::{
    effective_output_dir, metrics_csv, read_metrics_csv, run_experiment, summarize_rows,
    write_atomic, ExperimentOutput, ExperimentSummary, RunSummary, StrategyAggregate,
    ENV_OUTPUT_DIR, ENV_THREADS,
};
