//! Trading accuracy for speed by truncating the correlated-noise model to
//! `r2` tail modes, on a gridded dataset with spatially smooth modes.
//!
//! ```text
//! cargo run --release --example noise_truncation
//! ```

use sparse_sensing::harness::{run_r2_sweep, DatasetSpec, ExperimentConfig, Method};

fn main() -> sparse_sensing::Result<()> {
    let dataset = DatasetSpec::SmoothGrid {
        width: 60,
        height: 40,
        m: 200,
        hole: Some([20, 10, 15, 12]),
    };
    let mut cfg = ExperimentConfig::new(dataset, 10, vec![10, 20, 30, 40], vec![Method::BdgBe]);
    cfg.r2_values = vec![Some(0), Some(10), Some(40), None];
    let report = run_r2_sweep(&cfg)?;

    let mut ranks: Vec<usize> = report.records.iter().map(|r| r.r2).collect();
    ranks.dedup();
    println!("{:>5} {:>5} {:>12} {:>12}", "r2", "p", "mean error", "select [ms]");
    for r2 in ranks {
        let errors = report.mean_curve(Method::BdgBe, Some(r2));
        let times = report.time_curve(Method::BdgBe, Some(r2));
        for ((p, e), (_, t)) in errors.iter().zip(&times) {
            println!("{r2:>5} {p:>5} {:>12.5} {:>12.3}", e / 200.0, t * 1e3);
        }
    }
    Ok(())
}
