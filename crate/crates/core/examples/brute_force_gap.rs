//! How far greedy selection falls short of the exhaustive optimum on
//! instances small enough to enumerate.
//!
//! ```text
//! cargo run --release --example brute_force_gap
//! ```

use sparse_sensing::datasets::{gen_random_dataset, RandomSpecConfig};
use sparse_sensing::estimators::{objective_logdet, MeasurementSetup};
use sparse_sensing::selectors::{select_bdg_fast, select_brute_force, CandidateSet};
use sparse_sensing::{compute_pod, NoiseModel, TruncationConfig};

fn main() -> sparse_sensing::Result<()> {
    let (n, m, r1, p) = (24, 16, 3, 4);
    let mut optimal = 0;
    println!("{:>5} {:>12} {:>12} {:>10}", "seed", "greedy", "optimum", "gap");
    for seed in 0..20 {
        let basis = compute_pod(&gen_random_dataset(&RandomSpecConfig::inverse_sqrt(n, m, seed))?)?;
        let noise = NoiseModel::build(&basis, TruncationConfig::full_tail(r1, basis.q())?)?;
        let all = CandidateSet::all(n);
        let mut greedy = select_bdg_fast(&basis, &noise, p, &all)?.indices;
        greedy.sort_unstable();
        let greedy_obj = objective_logdet(&MeasurementSetup::from_sensors(&basis, &noise, &greedy)?)?;
        let best = select_brute_force(&basis, &noise, p, &all)?;
        let gap = best.objective - greedy_obj;
        if best.indices == greedy {
            optimal += 1;
        }
        println!("{seed:>5} {greedy_obj:>12.5} {:>12.5} {gap:>10.2e}", best.objective);
    }
    println!("greedy found the optimum on {optimal}/20 instances");
    Ok(())
}
