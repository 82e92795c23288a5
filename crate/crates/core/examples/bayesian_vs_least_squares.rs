//! Least squares against the Bayesian estimate on the same sensors. Near
//! `p = r1` the least-squares system is barely determined and amplifies the
//! unmodelled tail; the prior keeps the Bayesian estimate stable.
//!
//! ```text
//! cargo run --release --example bayesian_vs_least_squares
//! ```

use sparse_sensing::datasets::{gen_random_dataset, RandomSpecConfig};
use sparse_sensing::estimators::{estimate_snapshot, Estimator, MeasurementSetup};
use sparse_sensing::selectors::{select_dg, CandidateSet};
use sparse_sensing::{compute_pod, NoiseModel, TruncationConfig};

fn main() -> sparse_sensing::Result<()> {
    let x = gen_random_dataset(&RandomSpecConfig::inverse_sqrt(400, 200, 3))?;
    let basis = compute_pod(&x)?;
    let r1 = 8;
    let noise = NoiseModel::build(&basis, TruncationConfig::full_tail(r1, basis.q())?)?;
    let sensors = select_dg(&basis, r1, 16, &CandidateSet::all(basis.n()))?;

    println!("{:>3} {:>10} {:>10}", "p", "LSE", "BE");
    for p in 2..=16 {
        let setup = MeasurementSetup::from_sensors(&basis, &noise, &sensors[..p])?;
        let mut errors = [0.0; 2];
        for (slot, estimator) in [Estimator::LeastSquares, Estimator::Bayesian].into_iter().enumerate() {
            for snapshot in x.values().column_iter() {
                let y = setup
                    .sensor_indices
                    .iter()
                    .map(|&i| snapshot[i])
                    .collect::<Vec<_>>()
                    .into();
                let est = estimate_snapshot(&basis, &setup, &y, estimator)?;
                errors[slot] += (snapshot - &est.x_hat).norm() / snapshot.norm();
            }
        }
        println!("{p:>3} {:>10.4} {:>10.4}", errors[0] / 200.0, errors[1] / 200.0);
    }
    Ok(())
}
