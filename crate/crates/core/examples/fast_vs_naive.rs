//! Incremental greedy selection against the reference that rebuilds every
//! candidate's covariance: same sensors, very different cost.
//!
//! ```text
//! cargo run --release --example fast_vs_naive
//! ```

use std::time::Instant;

use sparse_sensing::datasets::{gen_random_dataset, RandomSpecConfig};
use sparse_sensing::selectors::{select_bdg_fast, select_bdg_naive, CandidateSet};
use sparse_sensing::{compute_pod, NoiseModel, TruncationConfig};

fn main() -> sparse_sensing::Result<()> {
    let x = gen_random_dataset(&RandomSpecConfig::inverse_sqrt(1000, 500, 7))?;
    let basis = compute_pod(&x)?;
    let noise = NoiseModel::build(&basis, TruncationConfig::full_tail(10, basis.q())?)?;
    let all = CandidateSet::all(basis.n());

    println!("{:>3} {:>12} {:>12} {:>8}", "p", "fast [ms]", "naive [ms]", "same");
    for p in [5, 10, 20, 30] {
        let start = Instant::now();
        let fast = select_bdg_fast(&basis, &noise, p, &all)?;
        let t_fast = start.elapsed().as_secs_f64() * 1e3;
        let start = Instant::now();
        let naive = select_bdg_naive(&basis, &noise, p, &all)?;
        let t_naive = start.elapsed().as_secs_f64() * 1e3;
        println!(
            "{p:>3} {t_fast:>12.2} {t_naive:>12.2} {:>8}",
            fast.indices == naive.indices
        );
    }

    // Each step multiplies det(W) by 1 + score.
    let state = select_bdg_fast(&basis, &noise, 20, &all)?;
    let incremental = state.dense_logdet()?;
    println!("log det W: incremental {:.12}, dense {incremental:.12}", state.logdet_w);
    for step in state.steps.iter().take(5) {
        println!(
            "  sensor {:>4}  score {:>10.4}  schur {:.3e}",
            step.index, step.score, step.schur
        );
    }
    Ok(())
}
