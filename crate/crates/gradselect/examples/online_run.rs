//! One online fine-tuning run, end to end.
//!
//! Generates a mixed-quality corpus, runs the two-stage strategy under Adam
//! with the default budget, and prints the metrics stream.
//!
//! Run: `cargo run --release --example online_run`

use gradselect::selector::Strategy;
use gradselect::simkit::{run_online, CorpusSpec, MetricsRow, PoolSchedule, RunConfig};

fn main() {
    let mut cfg = RunConfig::default();
    cfg.corpus = CorpusSpec {
        n: 1200,
        target_size: 96,
        ..CorpusSpec::default()
    };
    cfg.pool = PoolSchedule {
        b_tr: 8,
        alpha: 4,
        b_val: 8,
        steps: 400,
        budget_fraction: 0.2,
    };
    cfg.eval_interval = 5;

    let result = run_online(&cfg, Strategy::TwoStage, 42).unwrap();

    println!("{}", MetricsRow::CSV_HEADER);
    for row in &result.rows {
        println!("{}", row.to_csv_line());
    }
    println!(
        "\nsteps executed: {}, samples consumed: {} ({:.1}% of the corpus)",
        result.steps_executed,
        result.samples_consumed,
        100.0 * result.samples_consumed as f64 / cfg.corpus.n as f64
    );
    let first = result.rows.first().unwrap();
    let last = result.rows.last().unwrap();
    println!(
        "target loss {:.4} -> {:.4}; accuracy {:.3} -> {:.3}; clean fraction {:.3}",
        first.target_loss,
        last.target_loss,
        first.eval_accuracy,
        last.eval_accuracy,
        last.selected_clean_fraction
    );
}
