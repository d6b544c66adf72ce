//! Sweep several selection strategies over seeds and compare.
//!
//! Uses the experiment harness: one metrics CSV per (strategy, seed) plus a
//! summary JSON with across-seed statistics, all under a temp directory.
//!
//! Run: `cargo run --release --example strategy_comparison`

use gradselect::harness::{run_experiment, ExperimentConfig};
use gradselect::simkit::CorpusSpec;

fn main() {
    let dir = std::env::temp_dir().join("gradselect_strategy_comparison");
    std::fs::create_dir_all(&dir).expect("temp dir");

    let mut cfg = ExperimentConfig::default();
    cfg.seeds = vec![1, 2, 3, 4, 5];
    cfg.eval_interval = 5;
    cfg.output_dir = dir.clone();
    cfg.fixed_corpus_seed = Some(99);
    cfg.fixed_model_seed = Some(1000);
    cfg.corpus = CorpusSpec {
        n: 2000,
        ..CorpusSpec::default()
    };
    cfg.pool.budget_fraction = 0.1;
    cfg.strategy.names = vec![
        "two_stage".into(),
        "hard_filter_reweight".into(),
        "topk_aware".into(),
        "topk_raw".into(),
        "omp".into(),
        "random".into(),
    ];

    let out = run_experiment(&cfg).expect("sweep");
    println!(
        "{:<22} {:>11} {:>9} {:>11} {:>9} {:>8}",
        "strategy", "final mean", "std", "best mean", "std", "clean"
    );
    for agg in &out.summary.strategies {
        println!(
            "{:<22} {:>11.4} {:>9.4} {:>11.4} {:>9.4} {:>8.3}",
            agg.strategy,
            agg.final_mean,
            agg.final_std,
            agg.best_mean,
            agg.best_std,
            agg.final_clean_fraction_mean
        );
    }
    println!(
        "\nmetrics CSVs and summary.json under {}",
        out.output_dir.display()
    );
}
