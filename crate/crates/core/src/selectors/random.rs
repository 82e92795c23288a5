use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::CandidateSet;
use crate::error::{Result, SensingError};

/// Uniform sample of `p` distinct eligible points, sorted, reproducible per seed.
pub fn select_random(p: usize, seed: u64, candidates: &CandidateSet) -> Result<Vec<usize>> {
    let eligible = candidates.eligible();
    if p == 0 || p > eligible.len() {
        return Err(SensingError::InfeasibleCandidates {
            eligible: eligible.len(),
            required: p.max(1),
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, eligible.len(), p)
        .into_iter()
        .map(|j| eligible[j])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}
