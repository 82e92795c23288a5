//! Greedy and reference sensor-selection algorithms.
//!
//! Every selector scans the eligible candidates (`CandidateSet`) in increasing
//! index order and appends the best-scoring one. Scores that lie within
//! [`TIE_TOLERANCE`] (relative) of the step maximum count as ties and the lowest
//! index wins, so results do not depend on floating-point noise in the scan.

mod bdg;
mod brute;
mod dg;
mod random;

pub use bdg::{select_bdg_fast, select_bdg_naive, NaiveSelection, SelectionState, StepRecord};
pub use brute::{select_brute_force, BruteForceResult, BRUTE_FORCE_LIMIT};
pub use dg::select_dg;
pub use random::select_random;

use crate::error::{Result, SensingError};
use crate::pod::{PodBasis, SnapshotMatrix};

/// Relative score difference below which two candidates are tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Default low-RMS exclusion factor relative to the maximum RMS.
pub const DEFAULT_EXCLUSION_FACTOR: f64 = 1e-3;

/// Eligible sensor locations and the temporal RMS they were chosen from.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub included: Vec<bool>,
    pub rms: Vec<f64>,
}

impl CandidateSet {
    /// Every point eligible; RMS unknown (reported as zero).
    pub fn all(n: usize) -> Self {
        CandidateSet {
            included: vec![true; n],
            rms: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.included.len()
    }

    pub fn is_empty(&self) -> bool {
        self.included.is_empty()
    }

    pub fn eligible(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.included[i]).collect()
    }

    pub fn eligible_count(&self) -> usize {
        self.included.iter().filter(|&&b| b).count()
    }

    pub fn excluded_count(&self) -> usize {
        self.len() - self.eligible_count()
    }
}

/// Drops points whose temporal RMS is below `factor` times the largest RMS.
///
/// `factor = 0` keeps every point. Fails when fewer than `min_eligible` points
/// survive.
pub fn exclude_low_rms(x: &SnapshotMatrix, factor: f64, min_eligible: usize) -> Result<CandidateSet> {
    if !(0.0..1.0).contains(&factor) {
        return Err(SensingError::InvalidArgument(format!(
            "exclusion factor {factor} outside [0, 1)"
        )));
    }
    let m = x.m() as f64;
    let rms: Vec<f64> = x
        .values()
        .row_iter()
        .map(|row| (row.norm_squared() / m).sqrt())
        .collect();
    let max = rms.iter().copied().fold(0.0, f64::max);
    let threshold = factor * max;
    let included: Vec<bool> = rms
        .iter()
        .map(|&r| if factor > 0.0 { r >= threshold && r > 0.0 } else { true })
        .collect();
    let set = CandidateSet { included, rms };
    let eligible = set.eligible_count();
    if eligible < min_eligible {
        return Err(SensingError::InfeasibleCandidates {
            eligible,
            required: min_eligible,
        });
    }
    Ok(set)
}

pub(crate) fn check_request(basis: &PodBasis, r1: usize, p: usize, candidates: &CandidateSet) -> Result<()> {
    if candidates.len() != basis.n() {
        return Err(SensingError::DimensionMismatch(format!(
            "candidate set covers {} points, basis {}",
            candidates.len(),
            basis.n()
        )));
    }
    if r1 == 0 || r1 > basis.q() {
        return Err(SensingError::InvalidConfig(format!(
            "r1 = {r1} must lie in 1..={}",
            basis.q()
        )));
    }
    if p == 0 {
        return Err(SensingError::InvalidArgument("p must be at least 1".into()));
    }
    let eligible = candidates.eligible_count();
    if p > eligible {
        return Err(SensingError::InfeasibleCandidates { eligible, required: p });
    }
    Ok(())
}

/// Lowest index whose score is within [`TIE_TOLERANCE`] of the maximum.
///
/// `scores` must be in increasing index order. The result does not depend on
/// the order scores were computed in, only on their values.
pub(crate) fn pick_best(scores: &[(usize, f64)]) -> Option<(usize, f64)> {
    let max = scores
        .iter()
        .map(|&(_, s)| s)
        .filter(|s| s.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let threshold = max - TIE_TOLERANCE * max.abs();
    scores.iter().copied().find(|&(_, s)| s.is_finite() && s >= threshold)
}
