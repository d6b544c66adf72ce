//! Command-line front end: run experiments, benchmark the scoring kernels,
//! or sweep the ablation variants.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gradselect::harness::{
    ablation_suite, bench_csv, bench_kernels, default_grid, parse_grid_spec, render_table,
    run_experiment, write_atomic, ExperimentConfig,
};

#[derive(Parser)]
#[command(
    name = "gsel",
    version,
    about = "Optimizer-aware online data selection experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the strategy sweep described by a config file.
    Run {
        /// Path to a TOML experiment config.
        config: PathBuf,
    },
    /// Benchmark the naive/ghost/reordered kernels against the cost model.
    Bench {
        /// Compact grid spec, e.g. "t=8,16 d=4,8 btr=6 bval=6 l=1".
        #[arg(long)]
        grid: Option<String>,
        /// Timing repetitions per grid point (minimum is kept).
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Where to write the benchmark CSV.
        #[arg(long, default_value = "bench_kernels.csv")]
        out: PathBuf,
        /// Seed for the synthetic factor batches.
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Run the ablation variant matrix over the config's seeds.
    Ablate {
        /// Path to a TOML experiment config.
        config: PathBuf,
    },
}

fn run(cli: Cli) -> gradselect::Result<()> {
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let out = run_experiment(&cfg)?;
            println!(
                "wrote {} metrics files to {}",
                out.csv_paths.len(),
                out.output_dir.display()
            );
            println!("summary: {}", out.summary_path.display());
            println!(
                "{:<22} {:>12} {:>12}",
                "strategy", "final_mean", "final_std"
            );
            for agg in &out.summary.strategies {
                println!(
                    "{:<22} {:>12.6} {:>12.6}",
                    agg.strategy, agg.final_mean, agg.final_std
                );
            }
        }
        Command::Bench {
            grid,
            reps,
            out,
            seed,
        } => {
            let grid = match grid {
                Some(spec) => parse_grid_spec(&spec)?,
                None => default_grid(),
            };
            let report = bench_kernels(&grid, reps, seed)?;
            write_atomic(&out, &bench_csv(&report))?;
            println!("wrote {} ({} points)", out.display(), report.points.len());
            for (kernel, rho) in &report.rank_correlation {
                println!(
                    "{:<10} spearman(measured, predicted) = {rho:.4}",
                    kernel.as_str()
                );
            }
            for (kernel, slope) in &report.scaling_exponent {
                println!(
                    "{:<10} fitted scaling exponent       = {slope:.4}",
                    kernel.as_str()
                );
            }
        }
        Command::Ablate { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let out = ablation_suite(&cfg)?;
            println!("{}", render_table(&out.rows));
            println!("table: {}", out.table_path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
