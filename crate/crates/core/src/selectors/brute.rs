use super::{check_request, CandidateSet, TIE_TOLERANCE};
use crate::error::{Result, SensingError};
use crate::estimators::{objective_logdet, MeasurementSetup};
use crate::noise::NoiseModel;
use crate::pod::PodBasis;

/// Largest number of subsets [`select_brute_force`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u64 = 2_000_000;

#[derive(Debug, Clone)]
pub struct BruteForceResult {
    /// Optimal set in increasing index order.
    pub indices: Vec<usize>,
    pub objective: f64,
    pub evaluated: u64,
    /// Subsets whose noise covariance was singular.
    pub skipped: u64,
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc * (n - j) as u128 / (j + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Exhaustive maximization of `log det(CᵀR⁻¹C + Q⁻¹)` over all `p`-subsets of
/// the eligible points. Ties go to the lexicographically smallest set.
pub fn select_brute_force(
    basis: &PodBasis,
    noise: &NoiseModel,
    p: usize,
    candidates: &CandidateSet,
) -> Result<BruteForceResult> {
    check_request(basis, noise.r1, p, candidates)?;
    let eligible = candidates.eligible();
    let total = binomial(eligible.len(), p);
    if total > BRUTE_FORCE_LIMIT {
        return Err(SensingError::ResourceLimit(format!(
            "{total} subsets of {p} among {} candidates exceed the {BRUTE_FORCE_LIMIT} limit",
            eligible.len()
        )));
    }

    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut evaluated = 0;
    let mut skipped = 0;
    // Positions into `eligible`, advanced in lexicographic order.
    let mut pos: Vec<usize> = (0..p).collect();
    loop {
        let subset: Vec<usize> = pos.iter().map(|&j| eligible[j]).collect();
        evaluated += 1;
        let value = MeasurementSetup::from_sensors(basis, noise, &subset).and_then(|s| objective_logdet(&s));
        match value {
            Ok(obj) if obj.is_finite() => {
                let better = match &best {
                    None => true,
                    Some((_, b)) => obj > b + TIE_TOLERANCE * b.abs(),
                };
                if better {
                    best = Some((subset, obj));
                }
            }
            _ => skipped += 1,
        }

        let Some(slot) = (0..p).rev().find(|&s| pos[s] < eligible.len() - p + s) else {
            break;
        };
        pos[slot] += 1;
        for s in slot + 1..p {
            pos[s] = pos[s - 1] + 1;
        }
    }

    let (indices, objective) = best.ok_or(SensingError::StepInfeasible {
        step: p,
        skipped: skipped as usize,
    })?;
    Ok(BruteForceResult {
        indices,
        objective,
        evaluated,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pod::{compute_pod, SnapshotMatrix, TruncationConfig};
    use crate::selectors::select_bdg_naive;
    use nalgebra::DMatrix;

    fn basis(n: usize, m: usize, salt: f64) -> PodBasis {
        let x = DMatrix::from_fn(n, m, |i, j| {
            let h = ((i as f64 + 1.0) * 12.9898 + (j as f64 + 1.0) * 78.233 + salt).sin() * 43758.5453;
            (h - h.floor() - 0.5) / (j as f64 + 1.0)
        });
        compute_pod(&SnapshotMatrix::new(x).unwrap()).unwrap()
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(12, 3), 220);
        assert_eq!(binomial(10, 0), 1);
        assert_eq!(binomial(200, 100), u64::MAX);
    }

    #[test]
    fn single_sensor_matches_greedy() {
        let b = basis(15, 9, 0.1);
        let noise = NoiseModel::build(&b, TruncationConfig::full_tail(2, b.q()).unwrap()).unwrap();
        let brute = select_brute_force(&b, &noise, 1, &CandidateSet::all(15)).unwrap();
        let greedy = select_bdg_naive(&b, &noise, 1, &CandidateSet::all(15)).unwrap();
        assert_eq!(brute.indices, greedy.indices);
        assert_eq!(brute.evaluated, 15);
    }

    #[test]
    fn optimum_dominates_greedy() {
        for salt in [0.3, 1.9, 5.2] {
            let b = basis(10, 8, salt);
            let noise = NoiseModel::build(&b, TruncationConfig::full_tail(2, b.q()).unwrap()).unwrap();
            let brute = select_brute_force(&b, &noise, 2, &CandidateSet::all(10)).unwrap();
            let greedy = select_bdg_naive(&b, &noise, 2, &CandidateSet::all(10)).unwrap();
            assert_eq!(brute.evaluated, 45);
            assert!(brute.objective >= greedy.logdet_w - 1e-9 * greedy.logdet_w.abs());
            assert!(brute.indices.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn guard() {
        let b = basis(40, 30, 0.0);
        let noise = NoiseModel::build(&b, TruncationConfig::full_tail(2, b.q()).unwrap()).unwrap();
        let err = select_brute_force(&b, &noise, 10, &CandidateSet::all(40)).unwrap_err();
        assert!(matches!(err, SensingError::ResourceLimit(_)));
    }
}
