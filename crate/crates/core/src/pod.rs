//! Snapshot matrices and their proper orthogonal decomposition.
//!
//! A [`SnapshotMatrix`] stores one spatial state per column. [`compute_pod`]
//! returns the economy SVD `X = U diag(sigma) Vᵀ` with `q = min(n, m)` factors,
//! singular values sorted in nonincreasing order and a fixed sign convention so
//! that repeated factorizations of the same matrix agree exactly.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Result, SensingError};

/// Training data `X`: `n` spatial points by `m` snapshots, all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    values: DMatrix<f64>,
}

impl SnapshotMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(SensingError::InvalidInput(format!(
                "snapshot matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % values.nrows(), pos / values.nrows());
            return Err(SensingError::InvalidInput(format!(
                "non-finite entry at row {row}, column {col}"
            )));
        }
        Ok(SnapshotMatrix { values })
    }

    /// Number of spatial points.
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of snapshots.
    pub fn m(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    /// Subtracts the temporal mean of every row. Returns the centered data and the mean.
    pub fn centered(&self) -> (SnapshotMatrix, DVector<f64>) {
        let mean = self.values.column_mean();
        let mut values = self.values.clone();
        for mut col in values.column_iter_mut() {
            col -= &mean;
        }
        (SnapshotMatrix { values }, mean)
    }

    /// Splits the snapshots into the first `count` columns and the remainder.
    pub fn split_columns(&self, count: usize) -> Result<(SnapshotMatrix, SnapshotMatrix)> {
        if count == 0 || count >= self.m() {
            return Err(SensingError::InvalidArgument(format!(
                "split at {count} leaves an empty part of {} snapshots",
                self.m()
            )));
        }
        let head = self.values.columns(0, count).into_owned();
        let tail = self.values.columns(count, self.m() - count).into_owned();
        Ok((SnapshotMatrix { values: head }, SnapshotMatrix { values: tail }))
    }
}

/// Retained signal modes `r1` and retained noise-tail modes `r2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TruncationConfig {
    pub r1: usize,
    pub r2: usize,
}

impl TruncationConfig {
    pub fn new(r1: usize, r2: usize, q: usize) -> Result<Self> {
        let cfg = TruncationConfig { r1, r2 };
        cfg.validate(q)?;
        Ok(cfg)
    }

    /// Untruncated noise tail: `r2 = q - r1`.
    pub fn full_tail(r1: usize, q: usize) -> Result<Self> {
        if r1 == 0 || r1 > q {
            return Err(SensingError::InvalidConfig(format!("r1 = {r1} must lie in 1..={q}")));
        }
        Ok(TruncationConfig { r1, r2: q - r1 })
    }

    pub fn validate(&self, q: usize) -> Result<()> {
        if self.r1 == 0 || self.r1 > q {
            return Err(SensingError::InvalidConfig(format!(
                "r1 = {} must lie in 1..={q}",
                self.r1
            )));
        }
        if self.r1 + self.r2 > q {
            return Err(SensingError::InvalidConfig(format!(
                "r1 + r2 = {} exceeds the {q} available modes",
                self.r1 + self.r2
            )));
        }
        Ok(())
    }
}

/// Economy SVD factors of a snapshot matrix.
#[derive(Debug, Clone)]
pub struct PodBasis {
    /// `n x q` spatial modes.
    pub u: DMatrix<f64>,
    /// Nonincreasing singular values, length `q`.
    pub sigma: DVector<f64>,
    /// `m x q` temporal modes.
    pub v: DMatrix<f64>,
}

impl PodBasis {
    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn m(&self) -> usize {
        self.v.nrows()
    }

    pub fn q(&self) -> usize {
        self.sigma.len()
    }

    /// Leading `r` spatial modes, `U_{1:r}`.
    pub fn modes(&self, r: usize) -> DMatrix<f64> {
        self.u.columns(0, r).into_owned()
    }

    /// `U_{1:r} diag(sigma_{1:r}) V_{1:r}ᵀ`.
    pub fn rank_r_reconstruct(&self, r: usize) -> Result<DMatrix<f64>> {
        if r == 0 || r > self.q() {
            return Err(SensingError::InvalidArgument(format!(
                "rank {r} outside 1..={}",
                self.q()
            )));
        }
        let mut scaled = self.u.columns(0, r).into_owned();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.sigma[k];
        }
        Ok(scaled * self.v.columns(0, r).transpose())
    }

    /// Row `i` of `U_{1:r1}`: the measurement a sensor at point `i` contributes.
    pub fn mode_row(&self, i: usize, r1: usize) -> Result<RowDVector<f64>> {
        if i >= self.n() {
            return Err(SensingError::IndexOutOfRange {
                index: i,
                len: self.n(),
            });
        }
        if r1 == 0 || r1 > self.q() {
            return Err(SensingError::InvalidArgument(format!(
                "r1 = {r1} outside 1..={}",
                self.q()
            )));
        }
        Ok(self.u.row(i).columns(0, r1).into_owned())
    }

    /// Multiplies every singular value by `c`.
    pub fn scaled(&self, c: f64) -> PodBasis {
        PodBasis {
            u: self.u.clone(),
            sigma: &self.sigma * c,
            v: self.v.clone(),
        }
    }
}

pub fn compute_pod(x: &SnapshotMatrix) -> Result<PodBasis> {
    let (n, m) = (x.n(), x.m());
    let q = n.min(m);
    let svd = faer::Mat::<f64>::from_fn(n, m, |i, j| x.values()[(i, j)])
        .thin_svd()
        .map_err(|e| SensingError::Numerical(format!("SVD did not converge: {e:?}")))?;
    let u_raw = DMatrix::from_fn(n, q, |i, j| svd.U()[(i, j)]);
    let v_raw = DMatrix::from_fn(m, q, |i, j| svd.V()[(i, j)]);
    let sigma_raw = DVector::from_fn(q, |k, _| svd.S()[k]);

    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| sigma_raw[b].total_cmp(&sigma_raw[a]).then(a.cmp(&b)));

    let mut u = DMatrix::zeros(n, q);
    let mut v = DMatrix::zeros(m, q);
    let mut sigma = DVector::zeros(q);
    for (dst, &src) in order.iter().enumerate() {
        let ucol = u_raw.column(src);
        // Largest-magnitude entry positive; ties go to the lower row.
        let mut pivot = 0;
        for r in 1..n {
            if ucol[r].abs() > ucol[pivot].abs() {
                pivot = r;
            }
        }
        let sign = if ucol[pivot] < 0.0 { -1.0 } else { 1.0 };
        u.set_column(dst, &(ucol * sign));
        v.set_column(dst, &(v_raw.column(src) * sign));
        sigma[dst] = sigma_raw[src].max(0.0);
    }
    Ok(PodBasis { u, sigma, v })
}
