//! Measured kernel wall times against the analytic cost model.
//!
//! The same comparison drives `gsel bench`; this prints a compact view of
//! the per-kernel rank correlation, fitted scaling exponents, and the
//! long-context regime where the reordered kernel pulls ahead of ghost.
//!
//! Run: `cargo run --release --example kernel_benchmark`

use gradselect::gradcore::KernelKind;
use gradselect::harness::{bench_kernels, default_grid};

fn main() {
    let grid = default_grid();
    let report = bench_kernels(&grid, 5, 7).expect("bench");

    println!(
        "measured vs predicted, {} grid points x 3 kernels:",
        grid.len()
    );
    for (kernel, rho) in &report.rank_correlation {
        println!("  {:<10} spearman = {rho:.3}", kernel.as_str());
    }
    for (kernel, slope) in &report.scaling_exponent {
        println!(
            "  {:<10} log-log slope vs prediction = {slope:.3}",
            kernel.as_str()
        );
    }

    println!("\nlong-context points (d1, d2 < T/2):");
    println!(
        "{:>4} {:>4} {:>4} {:>12} {:>12}",
        "T", "d1", "d2", "ghost_ns", "reordered_ns"
    );
    for dims in &grid {
        if dims.d1 * 2 < dims.t && dims.d2 * 2 < dims.t {
            let find = |k: KernelKind| {
                report
                    .points
                    .iter()
                    .find(|p| p.dims == *dims && p.kernel == k)
                    .unwrap()
                    .measured_ns
            };
            println!(
                "{:>4} {:>4} {:>4} {:>12.0} {:>12.0}",
                dims.t,
                dims.d1,
                dims.d2,
                find(KernelKind::Ghost),
                find(KernelKind::Reordered)
            );
        }
    }
}
