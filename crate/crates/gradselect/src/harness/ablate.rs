//! Ablation sweep over the selection-variant matrix.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::experiment::{run_experiment, write_atomic, ExperimentOutput};

/// The variant matrix: filtering mechanism × weighting mechanism ×
/// optimizer awareness, plus the full two-stage method.
pub const ABLATION_VARIANTS: [&str; 6] = [
    "hard_filter_reweight",
    "topk_aware",
    "topk_raw",
    "vanilla_reweight",
    "unbounded",
    "two_stage",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub best_mean: f64,
    pub best_std: f64,
    pub final_mean: f64,
    pub final_std: f64,
    /// Set when any applied weight was negative during any seed's run.
    pub negative_weights_applied: bool,
}

#[derive(Debug)]
pub struct AblationOutput {
    pub rows: Vec<AblationRow>,
    pub table_path: PathBuf,
    pub experiment: ExperimentOutput,
}

/// Run the six ablation variants over the config's seeds and emit one
/// comparison row per variant (best-of-run and fixed-budget columns).
pub fn ablation_suite(cfg: &ExperimentConfig) -> Result<AblationOutput> {
    let mut sweep = cfg.clone();
    sweep.strategy.names = ABLATION_VARIANTS.iter().map(|s| s.to_string()).collect();
    sweep.validate()?;
    let experiment = run_experiment(&sweep)?;

    let rows: Vec<AblationRow> = ABLATION_VARIANTS
        .iter()
        .map(|&variant| {
            let agg = experiment
                .summary
                .strategies
                .iter()
                .find(|a| a.strategy == variant)
                .ok_or_else(|| Error::Numerical(format!("missing variant {variant}")))?;
            Ok(AblationRow {
                variant: variant.to_string(),
                best_mean: agg.best_mean,
                best_std: agg.best_std,
                final_mean: agg.final_mean,
                final_std: agg.final_std,
                negative_weights_applied: agg.negative_weights_applied,
            })
        })
        .collect::<Result<_>>()?;

    let table_path = experiment.output_dir.join("ablation_summary.json");
    let json = serde_json::to_string_pretty(&rows)
        .map_err(|e| Error::Format(format!("ablation serialize: {e}")))?;
    write_atomic(&table_path, &json)?;
    Ok(AblationOutput {
        rows,
        table_path,
        experiment,
    })
}

/// Plain-text comparison table, one row per variant.
pub fn render_table(rows: &[AblationRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<22} {:>12} {:>10} {:>12} {:>10}  {}\n",
        "variant", "best_mean", "best_std", "final_mean", "final_std", "neg_weights"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<22} {:>12.6} {:>10.6} {:>12.6} {:>10.6}  {}\n",
            r.variant,
            r.best_mean,
            r.best_std,
            r.final_mean,
            r.final_std,
            if r.negative_weights_applied {
                "yes"
            } else {
                "no"
            }
        ));
    }
    out
}
