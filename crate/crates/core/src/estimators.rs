//! Amplitude estimation from sparse measurements.
//!
//! Two estimators are provided: the pseudo-inverse least-squares estimate
//! ([`lse`]) and the Bayesian MAP estimate ([`map_estimate`]),
//! `ẑ = (CᵀR⁻¹C + Q⁻¹)⁻¹ CᵀR⁻¹ y`. Symmetric systems are solved through Cholesky
//! factorizations; conditioning is checked first and reported as an error
//! rather than regularized away.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Result, SensingError};
use crate::noise::NoiseModel;
use crate::pod::{PodBasis, SnapshotMatrix};

/// Largest accepted condition estimate for Gram and noise matrices.
pub const CONDITION_LIMIT: f64 = 1e12;

/// `λ_max / λ_min` of a symmetric matrix; infinite when not positive definite.
pub fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let eig = a.clone().symmetric_eigen();
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if lo <= 0.0 || !lo.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn guarded_cholesky(a: DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    let condition = condition_estimate(&a);
    if condition > CONDITION_LIMIT {
        return Err(SensingError::IllConditioned {
            what,
            condition,
            limit: CONDITION_LIMIT,
        });
    }
    Cholesky::new(a).ok_or_else(|| SensingError::Numerical(format!("{what} is not positive definite")))
}

/// Pseudo-inverse estimate for every column of `y` (`p x s`).
pub fn lse_batch(c: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_rows(c, y.nrows())?;
    let (p, r1) = c.shape();
    if p < r1 {
        // Minimum-norm branch: Cᵀ (C Cᵀ)⁻¹ y.
        let chol = guarded_cholesky(c * c.transpose(), "measurement Gram matrix C Cᵀ")?;
        Ok(c.transpose() * chol.solve(y))
    } else {
        let chol = guarded_cholesky(c.transpose() * c, "measurement Gram matrix Cᵀ C")?;
        Ok(chol.solve(&(c.transpose() * y)))
    }
}

pub fn lse(c: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let z = lse_batch(c, &DMatrix::from_column_slice(y.len(), 1, y.as_slice()))?;
    Ok(z.column(0).into_owned())
}

fn check_rows(c: &DMatrix<f64>, p: usize) -> Result<()> {
    if c.nrows() != p {
        return Err(SensingError::DimensionMismatch(format!(
            "measurement matrix has {} rows, measurement vector {p}",
            c.nrows()
        )));
    }
    Ok(())
}

/// Sensor rows `C`, their noise covariance `R` and the prior variances `diag(Q)`.
#[derive(Debug, Clone)]
pub struct MeasurementSetup {
    pub c: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub q_diag: DVector<f64>,
    pub sensor_indices: Vec<usize>,
}

impl MeasurementSetup {
    pub fn new(c: DMatrix<f64>, r: DMatrix<f64>, q_diag: DVector<f64>, sensor_indices: Vec<usize>) -> Result<Self> {
        let p = sensor_indices.len();
        if c.nrows() != p || r.shape() != (p, p) || c.ncols() != q_diag.len() {
            return Err(SensingError::DimensionMismatch(format!(
                "C {:?}, R {:?}, Q {} for {p} sensors",
                c.shape(),
                r.shape(),
                q_diag.len()
            )));
        }
        if (&r - r.transpose()).amax() > 1e-10 * r.amax() {
            return Err(SensingError::InvalidInput("R is not symmetric".into()));
        }
        if r.diagonal().iter().any(|&v| v.is_nan() || v <= 0.0) {
            return Err(SensingError::SingularNoise {
                condition: f64::INFINITY,
            });
        }
        if q_diag.iter().any(|&v| v.is_nan() || v <= 0.0) {
            return Err(SensingError::InvalidInput("prior variances must be positive".into()));
        }
        Ok(MeasurementSetup {
            c,
            r,
            q_diag,
            sensor_indices,
        })
    }

    /// Rows of `U_{1:r1}` at the sensors, with `R` and `Q` from the noise model.
    pub fn from_sensors(basis: &PodBasis, noise: &NoiseModel, sensors: &[usize]) -> Result<Self> {
        let r1 = noise.r1;
        let mut c = DMatrix::zeros(sensors.len(), r1);
        for (row, &i) in sensors.iter().enumerate() {
            c.set_row(row, &basis.mode_row(i, r1)?);
        }
        let r = noise.sensor_covariance(sensors)?;
        MeasurementSetup::new(c, r, noise.q_diag.clone(), sensors.to_vec())
    }

    pub fn p(&self) -> usize {
        self.sensor_indices.len()
    }

    fn noise_cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        let condition = condition_estimate(&self.r);
        if condition > CONDITION_LIMIT {
            return Err(SensingError::SingularNoise { condition });
        }
        Cholesky::new(self.r.clone()).ok_or(SensingError::SingularNoise { condition })
    }

    /// `W = CᵀR⁻¹C + Q⁻¹`.
    pub fn information_matrix(&self) -> Result<DMatrix<f64>> {
        let mut w = DMatrix::from_diagonal(&self.q_diag.map(|v| 1.0 / v));
        if self.p() > 0 {
            let rinv_c = self.noise_cholesky()?.solve(&self.c);
            w += self.c.transpose() * rinv_c;
        }
        Ok((&w + w.transpose()) * 0.5)
    }

    /// The `r1 x p` linear map `y ↦ ẑ` of the MAP estimator.
    pub fn map_operator(&self) -> Result<DMatrix<f64>> {
        let r1 = self.c.ncols();
        if self.p() == 0 {
            return Ok(DMatrix::zeros(r1, 0));
        }
        let rinv_c = self.noise_cholesky()?.solve(&self.c);
        let w = self.c.transpose() * &rinv_c + DMatrix::from_diagonal(&self.q_diag.map(|v| 1.0 / v));
        let w = (&w + w.transpose()) * 0.5;
        let chol = Cholesky::new(w)
            .ok_or_else(|| SensingError::Numerical("information matrix is not positive definite".into()))?;
        Ok(chol.solve(&rinv_c.transpose()))
    }
}

pub fn map_estimate_batch(setup: &MeasurementSetup, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_rows(&setup.c, y.nrows())?;
    Ok(setup.map_operator()? * y)
}

pub fn map_estimate(setup: &MeasurementSetup, y: &DVector<f64>) -> Result<DVector<f64>> {
    check_rows(&setup.c, y.len())?;
    Ok(setup.map_operator()? * y)
}

/// `log det(CᵀR⁻¹C + Q⁻¹)`.
pub fn objective_logdet(setup: &MeasurementSetup) -> Result<f64> {
    let w = setup.information_matrix()?;
    let chol = Cholesky::new(w)
        .ok_or_else(|| SensingError::Numerical("information matrix is not positive definite".into()))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// `x̂ = U_{1:r1} ẑ`.
pub fn reconstruct_snapshot(basis: &PodBasis, z_hat: &DVector<f64>) -> DVector<f64> {
    basis.u.columns(0, z_hat.len()) * z_hat
}

/// Estimator choice for [`estimate_snapshot`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Estimator {
    LeastSquares,
    Bayesian,
}

#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub z_hat: DVector<f64>,
    pub x_hat: DVector<f64>,
    /// `‖y - C ẑ‖₂`.
    pub residual: f64,
}

pub fn estimate_snapshot(
    basis: &PodBasis,
    setup: &MeasurementSetup,
    y: &DVector<f64>,
    estimator: Estimator,
) -> Result<EstimationResult> {
    let z_hat = match estimator {
        Estimator::LeastSquares => lse(&setup.c, y)?,
        Estimator::Bayesian => map_estimate(setup, y)?,
    };
    let residual = (y - &setup.c * &z_hat).norm();
    let x_hat = reconstruct_snapshot(basis, &z_hat);
    Ok(EstimationResult { z_hat, x_hat, residual })
}

/// Sum over snapshots of `‖x(j) - x̂(j)‖₂ / ‖x(j)‖₂`.
pub fn reconstruction_error(x: &SnapshotMatrix, x_hat: &DMatrix<f64>) -> Result<f64> {
    if x.values().shape() != x_hat.shape() {
        return Err(SensingError::DimensionMismatch(format!(
            "data {:?} vs reconstruction {:?}",
            x.values().shape(),
            x_hat.shape()
        )));
    }
    let mut total = 0.0;
    for (j, (col, est)) in x.values().column_iter().zip(x_hat.column_iter()).enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(SensingError::ZeroNormColumn { column: j });
        }
        total += (col - est).norm() / norm;
    }
    Ok(total)
}
