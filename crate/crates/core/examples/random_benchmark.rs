//! Reconstruction error of the four selector/estimator pairings on the
//! `1/√k` random benchmark family.
//!
//! ```text
//! cargo run --release --example random_benchmark [OUT_DIR]
//! ```

use sparse_sensing::harness::{emit_report, run_error_sweep, DatasetSpec, ExperimentConfig, Method};

fn main() -> sparse_sensing::Result<()> {
    let methods = vec![Method::DgLse, Method::DgBe, Method::BdgLse, Method::BdgBe];
    let mut cfg = ExperimentConfig::new(
        DatasetSpec::Random { n: 1000, m: 500 },
        10,
        (1..=20).collect(),
        methods.clone(),
    );
    cfg.seeds = (0..5).collect();
    let report = run_error_sweep(&cfg)?;

    print!("{:>3}", "p");
    for m in &methods {
        print!("{:>11}", m.name());
    }
    println!();
    let curves: Vec<_> = methods.iter().map(|&m| report.mean_curve(m, None)).collect();
    for (row, &p) in cfg.p_values.iter().enumerate() {
        print!("{p:>3}");
        for curve in &curves {
            // Mean relative error per snapshot.
            print!("{:>11.4}", curve[row].1 / 500.0);
        }
        println!();
    }

    if let Some(out) = std::env::args().nth(1) {
        emit_report(&report, &out)?;
        println!("report written to {out}");
    }
    Ok(())
}
