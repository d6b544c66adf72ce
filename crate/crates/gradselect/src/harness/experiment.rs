//! Strategy × seed sweeps: run, persist metrics CSVs, aggregate summaries.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::stats::{mean, std_dev};
use crate::selector::Strategy;
use crate::simkit::{run_online, MetricsRow, RunResult};

/// Environment variable overriding the config's output directory.
pub const ENV_OUTPUT_DIR: &str = "GSEL_OUTPUT_DIR";
/// Environment variable bounding worker threads for the sweep.
pub const ENV_THREADS: &str = "GSEL_THREADS";

/// Per-run record in the summary. `best_*` is the best checkpoint on the
/// eval grid, `final_*` the last checkpoint at the budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub strategy: String,
    pub seed: u64,
    /// Lowest target loss over the eval grid.
    pub best_metric: f64,
    /// Target loss at the final checkpoint.
    pub final_metric: f64,
    pub best_accuracy: f64,
    pub final_accuracy: f64,
    pub final_clean_fraction: f64,
    /// First eval step at or below the configured loss threshold.
    pub steps_to_threshold: Option<usize>,
    pub wall_time_s: f64,
    pub negative_weights_applied: bool,
}

/// Across-seed aggregate for one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyAggregate {
    pub strategy: String,
    pub seeds: usize,
    pub best_mean: f64,
    pub best_std: f64,
    pub final_mean: f64,
    pub final_std: f64,
    pub final_accuracy_mean: f64,
    pub final_accuracy_std: f64,
    pub final_clean_fraction_mean: f64,
    pub negative_weights_applied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config_version: u32,
    /// Ordered by final_mean ascending (best strategy first).
    pub strategies: Vec<StrategyAggregate>,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub summary: ExperimentSummary,
    pub output_dir: PathBuf,
    pub summary_path: PathBuf,
    pub csv_paths: Vec<PathBuf>,
}

pub fn summarize_rows(
    strategy: Strategy,
    seed: u64,
    result: &RunResult,
    loss_threshold: Option<f64>,
    wall_time_s: f64,
) -> RunSummary {
    let losses: Vec<f64> = result.rows.iter().map(|r| r.target_loss).collect();
    let accs: Vec<f64> = result.rows.iter().map(|r| r.eval_accuracy).collect();
    let best_metric = losses.iter().cloned().fold(f64::INFINITY, f64::min);
    let final_metric = *losses.last().unwrap_or(&f64::INFINITY);
    let best_accuracy = accs.iter().cloned().fold(0.0f64, f64::max);
    let final_accuracy = *accs.last().unwrap_or(&0.0);
    let final_clean_fraction = result
        .rows
        .last()
        .map(|r| r.selected_clean_fraction)
        .unwrap_or(0.0);
    let steps_to_threshold = loss_threshold.and_then(|thr| {
        result
            .rows
            .iter()
            .find(|r| r.target_loss <= thr)
            .map(|r| r.step)
    });
    RunSummary {
        strategy: strategy.as_str().to_string(),
        seed,
        best_metric,
        final_metric,
        best_accuracy,
        final_accuracy,
        final_clean_fraction,
        steps_to_threshold,
        wall_time_s,
        negative_weights_applied: result.negative_weights_applied,
    }
}

/// Write content to `path` atomically (temp file + rename).
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(MetricsRow::CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == MetricsRow::CSV_HEADER => {}
        other => {
            return Err(Error::Format(format!("bad metrics header: {other:?}")));
        }
    }
    lines.map(MetricsRow::from_csv_line).collect()
}

fn aggregate(strategy: &str, runs: &[&RunSummary]) -> StrategyAggregate {
    let finals: Vec<f64> = runs.iter().map(|r| r.final_metric).collect();
    let bests: Vec<f64> = runs.iter().map(|r| r.best_metric).collect();
    let faccs: Vec<f64> = runs.iter().map(|r| r.final_accuracy).collect();
    let cleans: Vec<f64> = runs.iter().map(|r| r.final_clean_fraction).collect();
    StrategyAggregate {
        strategy: strategy.to_string(),
        seeds: runs.len(),
        best_mean: mean(&bests),
        best_std: std_dev(&bests),
        final_mean: mean(&finals),
        final_std: std_dev(&finals),
        final_accuracy_mean: mean(&faccs),
        final_accuracy_std: std_dev(&faccs),
        final_clean_fraction_mean: mean(&cleans),
        negative_weights_applied: runs.iter().any(|r| r.negative_weights_applied),
    }
}

fn worker_count(jobs: usize) -> usize {
    let from_env = std::env::var(ENV_THREADS)
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    let hw = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    from_env.unwrap_or(hw).clamp(1, jobs.max(1))
}

/// Resolve the effective output directory (env override wins).
pub fn effective_output_dir(cfg: &ExperimentConfig) -> PathBuf {
    std::env::var(ENV_OUTPUT_DIR)
        .map(PathBuf::from)
        .unwrap_or_else(|_| cfg.output_dir.clone())
}

/// Run every (strategy, seed) pair, write one metrics CSV per run and a
/// summary JSON with mean ± std per strategy for best-of-run and
/// fixed-budget metrics.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let strategies = cfg.strategies()?;
    let output_dir = effective_output_dir(cfg);
    fs::create_dir_all(&output_dir)?;

    let jobs: Vec<(Strategy, u64)> = strategies
        .iter()
        .flat_map(|&s| cfg.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let run_cfg = cfg.run_config();

    type JobOut = (usize, RunSummary, Vec<MetricsRow>);
    let results: Mutex<Vec<Option<Result<JobOut>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    let workers = worker_count(jobs.len());

    std::thread::scope(|scope| {
        for w in 0..workers {
            let jobs = &jobs;
            let run_cfg = &run_cfg;
            let results = &results;
            let threshold = cfg.loss_threshold;
            scope.spawn(move || {
                let mut idx = w;
                while idx < jobs.len() {
                    let (strategy, seed) = jobs[idx];
                    let started = Instant::now();
                    let out = run_online(run_cfg, strategy, seed).map(|r| {
                        let wall = started.elapsed().as_secs_f64();
                        let summary = summarize_rows(strategy, seed, &r, threshold, wall);
                        (idx, summary, r.rows)
                    });
                    results.lock().expect("poisoned results")[idx] = Some(out);
                    idx += workers;
                }
            });
        }
    });

    // Persist every finished run before reporting any failure, so a mid-run
    // error still leaves the completed metrics behind.
    let collected = results.into_inner().expect("poisoned results");
    let mut summaries: Vec<RunSummary> = Vec::with_capacity(jobs.len());
    let mut csv_paths = Vec::with_capacity(jobs.len());
    let mut first_failure: Option<Error> = None;
    for slot in collected {
        match slot.ok_or_else(|| Error::Numerical("worker dropped a job".into()))? {
            Ok((idx, summary, rows)) => {
                let (strategy, seed) = jobs[idx];
                let path =
                    output_dir.join(format!("metrics_{}_seed{}.csv", strategy.as_str(), seed));
                write_atomic(&path, &metrics_csv(&rows))?;
                csv_paths.push(path);
                summaries.push(summary);
            }
            Err(e) if first_failure.is_none() => first_failure = Some(e),
            Err(_) => {}
        }
    }
    if let Some(e) = first_failure {
        return Err(Error::Numerical(format!(
            "sweep failed after {} of {} runs (partial metrics left in {}): {e}",
            csv_paths.len(),
            jobs.len(),
            output_dir.display()
        )));
    }

    let mut by_strategy: Vec<StrategyAggregate> = strategies
        .iter()
        .map(|s| {
            let runs: Vec<&RunSummary> = summaries
                .iter()
                .filter(|r| r.strategy == s.as_str())
                .collect();
            aggregate(s.as_str(), &runs)
        })
        .collect();
    by_strategy.sort_by(|a, b| {
        a.final_mean
            .partial_cmp(&b.final_mean)
            .expect("finite losses")
    });

    let summary = ExperimentSummary {
        config_version: cfg.version,
        strategies: by_strategy,
        runs: summaries,
    };
    let summary_path = output_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Format(format!("summary serialize: {e}")))?;
    write_atomic(&summary_path, &json)?;

    Ok(ExperimentOutput {
        summary,
        output_dir,
        summary_path,
        csv_paths,
    })
}
