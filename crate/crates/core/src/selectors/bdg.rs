//! Bayesian determinant-based greedy selection.
//!
//! Both selectors maximize `log det(CᵀR⁻¹C + Q⁻¹)` one sensor at a time.
//! [`select_bdg_naive`] rebuilds `R` and `W` for every candidate and is kept as
//! the reference. [`select_bdg_fast`] keeps `R⁻¹` and `W⁻¹` from the previous
//! step and scores a candidate `i` with covariance row `s`, variance `t` and
//! mode row `u` by
//!
//! ```text
//! g     = t - s R⁻¹ sᵀ
//! v     = Cᵀ R⁻¹ sᵀ - uᵀ
//! score = vᵀ W⁻¹ v / g          det(W_k) = (1 + score) det(W_{k-1})
//! ```

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{check_request, pick_best, CandidateSet};
use crate::error::{Result, SensingError};
use crate::noise::NoiseModel;
use crate::pod::PodBasis;

/// `R⁻¹` is recomputed from `R` at least this often.
const REFRESH_INTERVAL: usize = 64;
/// ... and whenever `‖R⁻¹R - I‖_max` exceeds this.
const DRIFT_LIMIT: f64 = 1e-6;
/// Schur complements at or below `SCHUR_FLOOR * max(d)` disqualify a candidate.
const SCHUR_FLOOR: f64 = 1e-12;

fn schur_floor(noise: &NoiseModel) -> f64 {
    SCHUR_FLOOR * noise.d.max().max(0.0)
}

fn check_noise(basis: &PodBasis, noise: &NoiseModel) -> Result<()> {
    if noise.n() != basis.n() || noise.r1 > basis.q() {
        return Err(SensingError::DimensionMismatch(format!(
            "noise model for n = {}, r1 = {} does not match basis n = {}, q = {}",
            noise.n(),
            noise.r1,
            basis.n(),
            basis.q()
        )));
    }
    Ok(())
}

fn logdet_spd(a: DMatrix<f64>) -> Option<f64> {
    let chol = Cholesky::new(a)?;
    Some(2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// Outcome of [`select_bdg_naive`].
#[derive(Debug, Clone)]
pub struct NaiveSelection {
    pub indices: Vec<usize>,
    /// `log det(W_p)` of the final set.
    pub logdet_w: f64,
    /// Candidates skipped at each step because their `R` was singular.
    pub skipped: Vec<usize>,
}

/// Reference greedy selection: for every candidate, assemble `R_k^(i)` and
/// `W_k^(i)` densely and evaluate `det(W_k^(i))`.
pub fn select_bdg_naive(
    basis: &PodBasis,
    noise: &NoiseModel,
    p: usize,
    candidates: &CandidateSet,
) -> Result<NaiveSelection> {
    check_request(basis, noise.r1, p, candidates)?;
    check_noise(basis, noise)?;
    let r1 = noise.r1;
    let modes = basis.modes(r1);
    let prior_precision = DMatrix::from_diagonal(&noise.prior_precision());
    let g_min = schur_floor(noise);
    let eligible = candidates.eligible();
    let mut taken = vec![false; basis.n()];
    let mut selected: Vec<usize> = Vec::with_capacity(p);
    let mut skipped = Vec::with_capacity(p);
    let mut logdet_prev = logdet_spd(prior_precision.clone()).expect("prior precision is positive definite");

    for k in 1..=p {
        let r_prev = noise.sensor_covariance(&selected)?;
        let mut scores = Vec::with_capacity(eligible.len());
        let mut skipped_here = 0;
        let mut rows = selected.clone();
        rows.push(0);
        for &i in eligible.iter().filter(|&&i| !taken[i]) {
            *rows.last_mut().unwrap() = i;
            let s = noise.noise_cross_cov(i, &selected)?;
            let mut r = DMatrix::zeros(k, k);
            r.view_mut((0, 0), (k - 1, k - 1)).copy_from(&r_prev);
            for a in 0..k - 1 {
                r[(k - 1, a)] = s[a];
                r[(a, k - 1)] = s[a];
            }
            r[(k - 1, k - 1)] = noise.d[i];
            let chol = match Cholesky::new(r) {
                Some(chol) => chol,
                None => {
                    skipped_here += 1;
                    continue;
                }
            };
            // Last pivot squared is the Schur complement of the new sensor.
            let pivot = chol.l_dirty()[(k - 1, k - 1)];
            if pivot.is_nan() || pivot * pivot <= g_min {
                skipped_here += 1;
                continue;
            }
            let c = DMatrix::from_fn(k, r1, |a, b| modes[(rows[a], b)]);
            let w = c.transpose() * chol.solve(&c) + &prior_precision;
            match logdet_spd((&w + w.transpose()) * 0.5) {
                // Report the gain as a determinant ratio minus one, the same
                // quantity the fast selector scores.
                Some(logdet) => scores.push((i, (logdet - logdet_prev).exp_m1())),
                None => skipped_here += 1,
            }
        }
        let (best, score) = pick_best(&scores).ok_or(SensingError::StepInfeasible {
            step: k,
            skipped: skipped_here,
        })?;
        taken[best] = true;
        selected.push(best);
        skipped.push(skipped_here);
        logdet_prev += score.ln_1p();
    }
    Ok(NaiveSelection {
        indices: selected,
        logdet_w: logdet_prev,
        skipped,
    })
}

/// One step of [`select_bdg_fast`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub index: usize,
    /// `det(W_k) / det(W_{k-1}) - 1`.
    pub score: f64,
    /// Schur complement `t - s R⁻¹ sᵀ` of the chosen sensor.
    pub schur: f64,
    /// Candidates skipped for a Schur complement at or below the floor.
    pub skipped: usize,
}

/// Incrementally maintained quantities of the fast greedy selector.
#[derive(Debug, Clone)]
pub struct SelectionState {
    pub indices: Vec<usize>,
    /// `k x r1` selected mode rows.
    pub c: DMatrix<f64>,
    /// `k x k` sensor noise covariance.
    pub r: DMatrix<f64>,
    /// Maintained inverse of `r`.
    pub r_inv: DMatrix<f64>,
    /// Lower Cholesky factor of `r`, grown one row per step.
    pub r_factor: DMatrix<f64>,
    /// `CᵀR⁻¹C + Q⁻¹`.
    pub w: DMatrix<f64>,
    pub w_inv: DMatrix<f64>,
    pub logdet_w: f64,
    pub q_diag: DVector<f64>,
    pub steps: Vec<StepRecord>,
    /// Number of times `r_inv` was recomputed from scratch.
    pub refreshes: usize,
}

impl SelectionState {
    fn new(q_diag: &DVector<f64>) -> Self {
        let r1 = q_diag.len();
        SelectionState {
            indices: Vec::new(),
            c: DMatrix::zeros(0, r1),
            r: DMatrix::zeros(0, 0),
            r_inv: DMatrix::zeros(0, 0),
            r_factor: DMatrix::zeros(0, 0),
            w: DMatrix::from_diagonal(&q_diag.map(|v| 1.0 / v)),
            w_inv: DMatrix::from_diagonal(q_diag),
            logdet_w: -q_diag.iter().map(|v| v.ln()).sum::<f64>(),
            q_diag: q_diag.clone(),
            steps: Vec::new(),
            refreshes: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }

    /// `‖R⁻¹R - I‖_max` of the maintained inverse.
    pub fn inverse_drift(&self) -> f64 {
        let k = self.k();
        if k == 0 {
            return 0.0;
        }
        (&self.r_inv * &self.r - DMatrix::identity(k, k)).amax()
    }

    /// `log det(CᵀR⁻¹C + Q⁻¹)` from a fresh factorization of `R`.
    pub fn dense_logdet(&self) -> Result<f64> {
        let mut w = DMatrix::from_diagonal(&self.q_diag.map(|v| 1.0 / v));
        if self.k() > 0 {
            let chol = Cholesky::new(self.r.clone())
                .ok_or_else(|| SensingError::Numerical("sensor covariance lost definiteness".into()))?;
            w += self.c.transpose() * chol.solve(&self.c);
        }
        logdet_spd((&w + w.transpose()) * 0.5)
            .ok_or_else(|| SensingError::Numerical("information matrix lost definiteness".into()))
    }
}

struct Scan<'a> {
    modes: &'a DMatrix<f64>,
    noise: &'a NoiseModel,
    /// Column `j` holds the truncated covariance of every point with sensor `j`.
    cross: &'a DMatrix<f64>,
    state: &'a SelectionState,
    /// `R⁻¹C`, `(k-1) x r1`.
    rinv_c: DMatrix<f64>,
}

struct Evaluation {
    a: DVector<f64>,
    v: DVector<f64>,
    schur: f64,
    score: f64,
}

impl Scan<'_> {
    fn evaluate(&self, i: usize) -> Evaluation {
        let k1 = self.state.k();
        let s = DVector::from_fn(k1, |j, _| self.cross[(i, j)]);
        let a = &self.state.r_inv * &s;
        let schur = self.noise.d[i] - s.dot(&a);
        let v = self.rinv_c.tr_mul(&s) - self.modes.row(i).transpose();
        let score = v.dot(&(&self.state.w_inv * &v)) / schur;
        Evaluation { a, v, schur, score }
    }
}

/// Accelerated greedy selection with the determinant-lemma scalar criterion and
/// rank-`r2` cross-covariances (the truncation carried by `noise`).
pub fn select_bdg_fast(
    basis: &PodBasis,
    noise: &NoiseModel,
    p: usize,
    candidates: &CandidateSet,
) -> Result<SelectionState> {
    check_request(basis, noise.r1, p, candidates)?;
    check_noise(basis, noise)?;
    let n = basis.n();
    let modes = basis.modes(noise.r1);
    let g_min = schur_floor(noise);
    let eligible = candidates.eligible();
    let mut taken = vec![false; n];
    let mut cross = DMatrix::<f64>::zeros(n, p);
    let mut state = SelectionState::new(&noise.q_diag);

    for k in 1..=p {
        let scan = Scan {
            modes: &modes,
            noise,
            cross: &cross,
            state: &state,
            rinv_c: &state.r_inv * &state.c,
        };
        let mut scores = Vec::with_capacity(eligible.len());
        let mut skipped = 0;
        for &i in eligible.iter().filter(|&&i| !taken[i]) {
            let eval = scan.evaluate(i);
            if eval.schur > g_min {
                scores.push((i, eval.score));
            } else {
                skipped += 1;
            }
        }
        // The maintained inverse can overstate a Schur complement that has
        // collapsed to rounding level; confirm the winner on the Cholesky pivot.
        let mut chosen = None;
        while let Some((best, _)) = pick_best(&scores) {
            let s = DVector::from_fn(k - 1, |j, _| cross[(best, j)]);
            let l = state
                .r_factor
                .solve_lower_triangular(&s)
                .expect("Cholesky factor has positive pivots");
            let pivot2 = noise.d[best] - l.norm_squared();
            if pivot2 > g_min {
                chosen = Some((best, s, l, pivot2.sqrt()));
                break;
            }
            skipped += 1;
            scores.retain(|&(i, _)| i != best);
        }
        let (best, s, l, pivot) = chosen.ok_or(SensingError::StepInfeasible { step: k, skipped })?;
        let eval = scan.evaluate(best);
        drop(scan);

        grow(&mut state, best, &modes, &s, noise.d[best], &eval);
        let mut factor = state.r_factor.clone().insert_row(k - 1, 0.0).insert_column(k - 1, 0.0);
        for j in 0..k - 1 {
            factor[(k - 1, j)] = l[j];
        }
        factor[(k - 1, k - 1)] = pivot;
        state.r_factor = factor;
        state.steps.push(StepRecord {
            index: best,
            score: eval.score,
            schur: eval.schur,
            skipped,
        });
        taken[best] = true;
        if k < p {
            cross.set_column(k - 1, &noise.cross_cov_column(best));
        }

        if k % REFRESH_INTERVAL == 0 || state.inverse_drift() > DRIFT_LIMIT {
            refresh_inverse(&mut state);
        }
    }
    Ok(state)
}

/// Appends sensor `i` using the block-inverse and determinant-lemma updates.
fn grow(state: &mut SelectionState, i: usize, modes: &DMatrix<f64>, s: &DVector<f64>, t: f64, eval: &Evaluation) {
    let k1 = state.k();
    let k = k1 + 1;
    let g = eval.schur;

    let mut r = DMatrix::zeros(k, k);
    r.view_mut((0, 0), (k1, k1)).copy_from(&state.r);
    let mut r_inv = DMatrix::zeros(k, k);
    // alpha = R⁻¹ + a aᵀ / g, beta = -aᵀ / g, delta = 1 / g
    let alpha = &state.r_inv + (&eval.a * eval.a.transpose()) / g;
    r_inv.view_mut((0, 0), (k1, k1)).copy_from(&alpha);
    for j in 0..k1 {
        r[(k1, j)] = s[j];
        r[(j, k1)] = s[j];
        r_inv[(k1, j)] = -eval.a[j] / g;
        r_inv[(j, k1)] = -eval.a[j] / g;
    }
    r[(k1, k1)] = t;
    r_inv[(k1, k1)] = 1.0 / g;

    let c = state.c.clone().insert_row(k1, 0.0);
    let mut c = c;
    c.set_row(k1, &modes.row(i));

    state.w += (&eval.v * eval.v.transpose()) / g;
    state.w = (&state.w + state.w.transpose()) * 0.5;
    state.w_inv = match Cholesky::new(state.w.clone()) {
        Some(chol) => chol.inverse(),
        // W only gains positive semidefinite terms; keep the previous inverse
        // updated by Sherman-Morrison if rounding ever defeats Cholesky.
        None => {
            let wv = &state.w_inv * &eval.v;
            &state.w_inv - (&wv * wv.transpose()) / (g + eval.v.dot(&wv))
        }
    };
    state.logdet_w += eval.score.ln_1p();
    state.r = r;
    state.r_inv = r_inv;
    state.c = c;
    state.indices.push(i);
}

fn refresh_inverse(state: &mut SelectionState) {
    let k = state.k();
    let l_inv = state
        .r_factor
        .solve_lower_triangular(&DMatrix::identity(k, k))
        .expect("Cholesky factor has positive pivots");
    state.r_inv = l_inv.tr_mul(&l_inv);
    state.refreshes += 1;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pod::{compute_pod, SnapshotMatrix, TruncationConfig};

    fn sample_basis(n: usize, m: usize, salt: f64) -> PodBasis {
        let x = DMatrix::from_fn(n, m, |i, j| {
            let h = ((i as f64 + 1.0) * 12.9898 + (j as f64 + 1.0) * 78.233 + salt).sin() * 43758.5453;
            (h - h.floor() - 0.5) / (j as f64 + 1.0).sqrt()
        });
        compute_pod(&SnapshotMatrix::new(x).unwrap()).unwrap()
    }

    #[test]
    fn first_step_matches_prior_weighted_row_norm() {
        let basis = sample_basis(25, 12, 0.5);
        let noise = NoiseModel::build(&basis, TruncationConfig::full_tail(3, basis.q()).unwrap()).unwrap();
        let modes = basis.modes(3);
        let expected = (0..25)
            .max_by(|&a, &b| {
                let f = |i: usize| {
                    let u = modes.row(i);
                    (0..3).map(|k| u[k] * u[k] * noise.q_diag[k]).sum::<f64>() / noise.d[i]
                };
                f(a).total_cmp(&f(b))
            })
            .unwrap();
        let naive = select_bdg_naive(&basis, &noise, 1, &CandidateSet::all(25)).unwrap();
        let fast = select_bdg_fast(&basis, &noise, 1, &CandidateSet::all(25)).unwrap();
        assert_eq!(naive.indices, vec![expected]);
        assert_eq!(fast.indices, vec![expected]);
    }

    #[test]
    fn noiseless_data_is_infeasible() {
        let a = DVector::from_fn(10, |i, _| 1.0 + i as f64);
        let b = DVector::from_fn(4, |j, _| (j as f64 + 0.5).sin());
        let basis = compute_pod(&SnapshotMatrix::new(&a * b.transpose()).unwrap()).unwrap();
        let noise = NoiseModel::build(&basis, TruncationConfig { r1: 1, r2: 3 }).unwrap();
        let err = select_bdg_naive(&basis, &noise, 1, &CandidateSet::all(10)).unwrap_err();
        assert!(matches!(err, SensingError::StepInfeasible { step: 1, .. }));
        let err = select_bdg_fast(&basis, &noise, 1, &CandidateSet::all(10)).unwrap_err();
        assert!(matches!(err, SensingError::StepInfeasible { step: 1, .. }));
    }

    #[test]
    fn naive_objective_matches_fresh_evaluation() {
        let basis = sample_basis(10, 8, 2.2);
        let noise = NoiseModel::build(&basis, TruncationConfig::full_tail(2, basis.q()).unwrap()).unwrap();
        let sel = select_bdg_naive(&basis, &noise, 3, &CandidateSet::all(10)).unwrap();
        let setup = crate::estimators::MeasurementSetup::from_sensors(&basis, &noise, &sel.indices).unwrap();
        let fresh = crate::estimators::objective_logdet(&setup).unwrap();
        assert!((sel.logdet_w - fresh).abs() <= 1e-9 * fresh.abs().max(1.0));
    }

    #[test]
    fn fast_matches_naive_and_dense() {
        let basis = sample_basis(60, 20, 7.1);
        let noise = NoiseModel::build(&basis, TruncationConfig::full_tail(4, basis.q()).unwrap()).unwrap();
        let naive = select_bdg_naive(&basis, &noise, 10, &CandidateSet::all(60)).unwrap();
        let fast = select_bdg_fast(&basis, &noise, 10, &CandidateSet::all(60)).unwrap();
        assert_eq!(naive.indices, fast.indices);
        assert!(fast.inverse_drift() < 1e-6);
        let dense = fast.dense_logdet().unwrap();
        assert!((fast.logdet_w - dense).abs() <= 1e-8 * dense.abs());
        assert!(fast.steps.iter().all(|s| s.score >= 0.0 && s.schur > 0.0));
    }

    #[test]
    fn truncated_model_runs_both_ways() {
        let basis = sample_basis(40, 15, 4.4);
        let noise = NoiseModel::build(&basis, TruncationConfig { r1: 3, r2: 2 }).unwrap();
        let naive = select_bdg_naive(&basis, &noise, 6, &CandidateSet::all(40)).unwrap();
        let fast = select_bdg_fast(&basis, &noise, 6, &CandidateSet::all(40)).unwrap();
        assert_eq!(naive.indices, fast.indices);
    }

    #[test]
    fn refresh_keeps_inverse_accurate() {
        let basis = sample_basis(150, 90, 0.3);
        let noise = NoiseModel::build(&basis, TruncationConfig::full_tail(3, basis.q()).unwrap()).unwrap();
        let fast = select_bdg_fast(&basis, &noise, 70, &CandidateSet::all(150)).unwrap();
        assert!(fast.refreshes >= 1);
        assert!(fast.inverse_drift() < 1e-6);
    }
}
