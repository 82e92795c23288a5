//! Prior amplitude variances and the correlated noise model built from the
//! truncated POD tail.
//!
//! The prior covariance of the `r1` retained amplitudes is `Q = diag(sigma_{1:r1}²)`.
//! The full-state noise covariance is `ℛ = U_tail diag(sigma_tail²) U_tailᵀ`, which is
//! never formed except by [`dense_noise_cov`] (a test oracle). Instead the model keeps
//!
//! * `d`, the exact diagonal of `ℛ` over the whole tail `r1+1..q`, and
//! * the leading `r2` tail columns, from which off-diagonal covariances are evaluated.
//!
//! With `r2 = 0` every off-diagonal term is dropped; with `r2 = q - r1` the model
//! reproduces `ℛ` exactly.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SensingError};
use crate::pod::{PodBasis, TruncationConfig};

/// Largest `n` for which [`dense_noise_cov`] will allocate the `n x n` matrix.
pub const DENSE_NOISE_LIMIT: usize = 2000;

/// Prior variances below this fraction of the largest one are rejected.
const PRIOR_RELATIVE_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct NoiseModel {
    /// Diagonal of `Q`, length `r1`.
    pub q_diag: DVector<f64>,
    /// Per-point noise variance (diagonal of `ℛ`), length `n`.
    pub d: DVector<f64>,
    /// Tail modes `r1+1 ..= r1+r2`, `n x r2`.
    pub tail_u: DMatrix<f64>,
    /// Squared singular values of the retained tail modes, length `r2`.
    pub tail_sigma2: DVector<f64>,
    pub r1: usize,
    pub r2: usize,
}

impl NoiseModel {
    pub fn build(basis: &PodBasis, cfg: TruncationConfig) -> Result<Self> {
        let q = basis.q();
        cfg.validate(q)?;
        let TruncationConfig { r1, r2 } = cfg;

        let q_diag = DVector::from_iterator(r1, basis.sigma.iter().take(r1).map(|s| s * s));
        let q_max = q_diag.max();
        for (k, &v) in q_diag.iter().enumerate() {
            if v.is_nan() || v <= PRIOR_RELATIVE_FLOOR * q_max {
                return Err(SensingError::DegeneratePrior {
                    mode: k + 1,
                    value: basis.sigma[k],
                });
            }
        }

        let n = basis.n();
        // Tail singular values at rounding level are numerically zero.
        let rank_tol = basis.n().max(basis.m()) as f64 * f64::EPSILON * basis.sigma[0];
        let tail_sigma = |k: usize| if basis.sigma[k] > rank_tol { basis.sigma[k] } else { 0.0 };
        let mut d = DVector::zeros(n);
        for k in r1..q {
            let s2 = tail_sigma(k) * tail_sigma(k);
            if s2 == 0.0 {
                continue;
            }
            for (di, uik) in d.iter_mut().zip(basis.u.column(k).iter()) {
                *di += s2 * uik * uik;
            }
        }

        let tail_u = basis.u.columns(r1, r2).into_owned();
        let tail_sigma2 = DVector::from_fn(r2, |k, _| tail_sigma(r1 + k).powi(2));
        Ok(NoiseModel {
            q_diag,
            d,
            tail_u,
            tail_sigma2,
            r1,
            r2,
        })
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(SensingError::IndexOutOfRange {
                index: i,
                len: self.n(),
            });
        }
        Ok(())
    }

    /// Full (untruncated) noise variance at point `i`.
    pub fn noise_var(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        Ok(self.d[i])
    }

    /// Rank-`r2` approximation of `ℛ[a, b]`.
    pub fn truncated_cov(&self, a: usize, b: usize) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.r2 {
            acc += self.tail_u[(a, k)] * self.tail_sigma2[k] * self.tail_u[(b, k)];
        }
        acc
    }

    /// Truncated covariance between candidate `i` and each already selected sensor.
    pub fn noise_cross_cov(&self, i: usize, selected: &[usize]) -> Result<DVector<f64>> {
        self.check_index(i)?;
        let mut out = DVector::zeros(selected.len());
        for (slot, &j) in out.iter_mut().zip(selected) {
            self.check_index(j)?;
            if j == i {
                return Err(SensingError::InvalidArgument(format!(
                    "candidate {i} is already selected"
                )));
            }
            *slot = self.truncated_cov(i, j);
        }
        Ok(out)
    }

    /// Truncated covariance of every point with point `j`, i.e. column `j` of the
    /// rank-`r2` approximation of `ℛ`. Diagonal entry `j` is the truncated variance,
    /// not `d[j]`.
    pub fn cross_cov_column(&self, j: usize) -> DVector<f64> {
        if self.r2 == 0 {
            return DVector::zeros(self.n());
        }
        let weights = self.tail_u.row(j).transpose().component_mul(&self.tail_sigma2);
        &self.tail_u * weights
    }

    /// Sensor noise covariance `R = H ℛ Hᵀ` for the given sensors: `d` on the
    /// diagonal, rank-`r2` covariances off it.
    pub fn sensor_covariance(&self, sensors: &[usize]) -> Result<DMatrix<f64>> {
        for &i in sensors {
            self.check_index(i)?;
        }
        let p = sensors.len();
        let mut r = DMatrix::zeros(p, p);
        for a in 0..p {
            r[(a, a)] = self.d[sensors[a]];
            for b in 0..a {
                let c = self.truncated_cov(sensors[a], sensors[b]);
                r[(a, b)] = c;
                r[(b, a)] = c;
            }
        }
        Ok(r)
    }

    /// `Q⁻¹` as a vector of diagonal entries.
    pub fn prior_precision(&self) -> DVector<f64> {
        self.q_diag.map(|v| 1.0 / v)
    }
}

/// Explicit `ℛ = U_tail diag(sigma_tail²) U_tailᵀ` over the full tail.
pub fn dense_noise_cov(basis: &PodBasis, r1: usize) -> Result<DMatrix<f64>> {
    let n = basis.n();
    if n > DENSE_NOISE_LIMIT {
        return Err(SensingError::ResourceLimit(format!(
            "dense noise covariance for n = {n} exceeds the {DENSE_NOISE_LIMIT} point limit"
        )));
    }
    if r1 == 0 || r1 > basis.q() {
        return Err(SensingError::InvalidConfig(format!(
            "r1 = {r1} must lie in 1..={}",
            basis.q()
        )));
    }
    let tail = basis.q() - r1;
    let mut weighted = basis.u.columns(r1, tail).into_owned();
    for (k, mut col) in weighted.column_iter_mut().enumerate() {
        let s = basis.sigma[r1 + k];
        col *= s * s;
    }
    let cov = weighted * basis.u.columns(r1, tail).transpose();
    Ok((&cov + cov.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pod::{compute_pod, SnapshotMatrix};
    use approx::assert_abs_diff_eq;

    fn identity_basis() -> PodBasis {
        compute_pod(&SnapshotMatrix::new(DMatrix::identity(3, 3)).unwrap()).unwrap()
    }

    fn wavy_basis(n: usize, m: usize) -> PodBasis {
        let x = DMatrix::from_fn(n, m, |i, j| {
            let (fi, fj) = (i as f64, j as f64);
            (0.37 * fi * (fj + 1.0)).sin() / (fj + 1.0).sqrt() + 0.1 * (1.3 * fi - 0.4 * fj).cos()
        });
        compute_pod(&SnapshotMatrix::new(x).unwrap()).unwrap()
    }

    #[test]
    fn identity_case() {
        let model = NoiseModel::build(&identity_basis(), TruncationConfig { r1: 2, r2: 1 }).unwrap();
        assert_abs_diff_eq!(model.q_diag, DVector::from_vec(vec![1.0, 1.0]), epsilon = 1e-14);
        // Which unit point carries the tail mode depends on the SVD's column
        // order for equal singular values; d is a permutation of [0, 0, 1].
        let mut d: Vec<f64> = model.d.iter().copied().collect();
        d.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(d.as_slice(), [0.0, 0.0, 1.0].as_slice(), epsilon = 1e-14);
        let tail_point = model.d.imax();
        assert_abs_diff_eq!(model.noise_var(tail_point).unwrap(), 1.0, epsilon = 1e-14);
        let dense = dense_noise_cov(&identity_basis(), 2).unwrap();
        assert_abs_diff_eq!(dense.diagonal(), model.d, epsilon = 1e-14);
        assert_abs_diff_eq!(dense.sum(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn noiseless_rank_r1_data_has_zero_variance() {
        let a = DVector::from_fn(8, |i, _| (i as f64 + 1.0).ln());
        let b = DVector::from_fn(5, |j, _| (j as f64 * 0.7).cos());
        let basis = compute_pod(&SnapshotMatrix::new(&a * b.transpose()).unwrap()).unwrap();
        let model = NoiseModel::build(&basis, TruncationConfig { r1: 1, r2: 4 }).unwrap();
        assert_eq!(model.d, DVector::zeros(8));
        assert!(dense_noise_cov(&basis, 1).unwrap().amax() < 1e-20);
    }

    #[test]
    fn variance_matches_explicit_sum_and_dense_oracle() {
        let basis = wavy_basis(50, 20);
        let r1 = 4;
        let model = NoiseModel::build(&basis, TruncationConfig::full_tail(r1, basis.q()).unwrap()).unwrap();
        let dense = dense_noise_cov(&basis, r1).unwrap();
        for i in 0..50 {
            let mut explicit = 0.0;
            for k in r1..basis.q() {
                explicit += basis.sigma[k].powi(2) * basis.u[(i, k)].powi(2);
            }
            assert!((model.d[i] - explicit).abs() < 1e-10);
            assert!((model.noise_var(i).unwrap() - dense[(i, i)]).abs() < 1e-12);
        }
        let selected = [3usize, 17, 41, 8];
        let s = model.noise_cross_cov(22, &selected).unwrap();
        for (k, &j) in selected.iter().enumerate() {
            assert!((s[k] - dense[(22, j)]).abs() < 1e-10);
        }
        let col = model.cross_cov_column(17);
        for i in 0..50 {
            assert!((col[i] - dense[(i, 17)]).abs() < 1e-10);
        }
        let eig = dense.clone().symmetric_eigen();
        assert!(eig.eigenvalues.min() >= -1e-10);
    }

    #[test]
    fn zero_r2_drops_cross_covariance() {
        let basis = wavy_basis(30, 12);
        let model = NoiseModel::build(&basis, TruncationConfig { r1: 3, r2: 0 }).unwrap();
        let s = model.noise_cross_cov(5, &[1, 2, 9]).unwrap();
        assert_eq!(s, DVector::zeros(3));
        assert!(model.noise_cross_cov(5, &[]).unwrap().is_empty());
        let r = model.sensor_covariance(&[1, 2, 9]).unwrap();
        assert_eq!(
            r,
            DMatrix::from_diagonal(&DVector::from_vec(vec![model.d[1], model.d[2], model.d[9]]))
        );
    }

    #[test]
    fn truncated_variance_never_exceeds_full() {
        let basis = wavy_basis(40, 15);
        for r2 in 0..=(basis.q() - 2) {
            let model = NoiseModel::build(&basis, TruncationConfig { r1: 2, r2 }).unwrap();
            for i in 0..40 {
                assert!(model.truncated_cov(i, i) <= model.d[i] + 1e-10);
            }
        }
    }

    #[test]
    fn truncation_converges_to_dense() {
        let basis = wavy_basis(40, 15);
        let r1 = 2;
        let dense = dense_noise_cov(&basis, r1).unwrap();
        let selected: Vec<usize> = (0..40).step_by(3).filter(|&j| j != 7).collect();
        let exact = DVector::from_iterator(selected.len(), selected.iter().map(|&j| dense[(7, j)]));
        let mut prev_self = -1.0;
        let mut gap = f64::INFINITY;
        for r2 in 0..=(basis.q() - r1) {
            let model = NoiseModel::build(&basis, TruncationConfig { r1, r2 }).unwrap();
            // Self-covariance accumulates nonnegative tail terms.
            let self_cov = model.truncated_cov(7, 7);
            assert!(self_cov >= prev_self - 1e-15);
            prev_self = self_cov;
            gap = (model.noise_cross_cov(7, &selected).unwrap() - &exact).norm();
        }
        assert!((prev_self - dense[(7, 7)]).abs() < 1e-12);
        assert!(gap < 1e-10);
    }

    #[test]
    fn scaling_singular_values_scales_quadratically() {
        let basis = wavy_basis(25, 10);
        let cfg = TruncationConfig { r1: 3, r2: 4 };
        let a = NoiseModel::build(&basis, cfg).unwrap();
        let b = NoiseModel::build(&basis.scaled(2.5), cfg).unwrap();
        assert_abs_diff_eq!(b.q_diag, &a.q_diag * 6.25, epsilon = 1e-12);
        assert_abs_diff_eq!(b.d, &a.d * 6.25, epsilon = 1e-12);
    }

    #[test]
    fn errors() {
        let basis = identity_basis();
        assert!(matches!(
            NoiseModel::build(&basis, TruncationConfig { r1: 2, r2: 2 }),
            Err(SensingError::InvalidConfig(_))
        ));
        let mut zero = DMatrix::zeros(4, 3);
        zero[(0, 0)] = 1.0;
        let degenerate = compute_pod(&SnapshotMatrix::new(zero).unwrap()).unwrap();
        assert!(matches!(
            NoiseModel::build(&degenerate, TruncationConfig { r1: 2, r2: 0 }),
            Err(SensingError::DegeneratePrior { mode: 2, .. })
        ));
        let model = NoiseModel::build(&basis, TruncationConfig { r1: 1, r2: 1 }).unwrap();
        assert!(matches!(
            model.noise_cross_cov(1, &[0, 1]),
            Err(SensingError::InvalidArgument(_))
        ));
        assert!(model.noise_var(3).is_err());
        let big = PodBasis {
            u: DMatrix::zeros(2001, 1),
            sigma: DVector::from_element(1, 1.0),
            v: DMatrix::zeros(1, 1),
        };
        assert!(matches!(dense_noise_cov(&big, 1), Err(SensingError::ResourceLimit(_))));
    }
}
