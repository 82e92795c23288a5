use nalgebra::{DMatrix, DVector};

use super::{check_request, pick_best, CandidateSet};
use crate::error::Result;
use crate::pod::PodBasis;

/// Determinant-based greedy selection ignoring noise.
///
/// While `k <= r1` the step maximizes `det(C Cᵀ)`, evaluated as the squared
/// residual of `u_i` after projection onto the row space of the current `C`.
/// Afterwards it maximizes `det(CᵀC)` through `1 + u_i (CᵀC)⁻¹ u_iᵀ`.
pub fn select_dg(basis: &PodBasis, r1: usize, p: usize, candidates: &CandidateSet) -> Result<Vec<usize>> {
    check_request(basis, r1, p, candidates)?;
    let modes = basis.modes(r1);
    let eligible = candidates.eligible();
    let mut taken = vec![false; basis.n()];
    let mut selected = Vec::with_capacity(p);
    // Orthonormal basis of the row space of C, grown while k <= r1.
    let mut row_space: Vec<DVector<f64>> = Vec::new();
    let mut gram = DMatrix::<f64>::zeros(r1, r1);

    for k in 1..=p {
        let scores: Vec<(usize, f64)> = if k <= r1 {
            eligible
                .iter()
                .filter(|&&i| !taken[i])
                .map(|&i| {
                    let u = modes.row(i).transpose();
                    let mut residual = u.norm_squared();
                    for q in &row_space {
                        let proj = q.dot(&u);
                        residual -= proj * proj;
                    }
                    (i, residual)
                })
                .collect()
        } else {
            let inv = gram_inverse(&gram);
            eligible
                .iter()
                .filter(|&&i| !taken[i])
                .map(|&i| {
                    let u = modes.row(i).transpose();
                    (i, 1.0 + u.dot(&(&inv * &u)))
                })
                .collect()
        };
        // Scores are nonnegative norms; there is always at least one eligible point.
        let (best, _) = pick_best(&scores).expect("check_request guarantees a candidate");
        taken[best] = true;
        selected.push(best);

        let u = modes.row(best).transpose();
        gram += &u * u.transpose();
        if k <= r1 {
            // Two passes of Gram-Schmidt.
            let mut w = u.clone();
            for _ in 0..2 {
                for q in &row_space {
                    let proj = q.dot(&w);
                    w -= q * proj;
                }
            }
            let norm = w.norm();
            if norm > 1e-12 * u.norm().max(f64::MIN_POSITIVE) {
                row_space.push(w / norm);
            }
        }
    }
    Ok(selected)
}

fn gram_inverse(gram: &DMatrix<f64>) -> DMatrix<f64> {
    match gram.clone().cholesky() {
        Some(chol) => chol.inverse(),
        None => gram
            .clone()
            .pseudo_inverse(1e-12 * gram.amax().max(f64::MIN_POSITIVE))
            .expect("pseudo-inverse of a symmetric matrix"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pod::{compute_pod, SnapshotMatrix};

    fn noisy_basis(n: usize, m: usize, salt: f64) -> PodBasis {
        let x = DMatrix::from_fn(n, m, |i, j| {
            ((i as f64 + 1.0) * 12.9898 + (j as f64 + 1.0) * 78.233 + salt).sin() * 43758.5453 % 1.0
        });
        compute_pod(&SnapshotMatrix::new(x).unwrap()).unwrap()
    }

    #[test]
    fn identity_rows() {
        let basis = compute_pod(&SnapshotMatrix::new(DMatrix::identity(3, 3)).unwrap()).unwrap();
        let sel = select_dg(&basis, 2, 2, &CandidateSet::all(3)).unwrap();
        // Rows of U_{1:2} have norms 1, 1, 0 in some order; the two unit rows win.
        let mut sorted = sel.clone();
        sorted.sort();
        let unit: Vec<usize> = (0..3).filter(|&i| basis.modes(2).row(i).norm() > 0.5).collect();
        assert_eq!(sorted, unit);
        assert!(sel[0] < sel[1], "equal scores resolve to the lower index first");
    }

    #[test]
    fn first_sensor_maximizes_row_norm() {
        let basis = noisy_basis(30, 10, 0.4);
        let modes = basis.modes(4);
        let best = (0..30)
            .max_by(|&a, &b| modes.row(a).norm_squared().total_cmp(&modes.row(b).norm_squared()))
            .unwrap();
        assert_eq!(select_dg(&basis, 4, 1, &CandidateSet::all(30)).unwrap(), vec![best]);
    }

    #[test]
    fn each_step_beats_every_alternative() {
        let basis = noisy_basis(12, 8, 1.7);
        let r1 = 2;
        let modes = basis.modes(r1);
        let sel = select_dg(&basis, r1, 4, &CandidateSet::all(12)).unwrap();
        let objective = |rows: &[usize]| {
            let c = DMatrix::from_fn(rows.len(), r1, |a, b| modes[(rows[a], b)]);
            if rows.len() <= r1 {
                (&c * c.transpose()).determinant()
            } else {
                (c.transpose() * &c).determinant()
            }
        };
        for k in 1..=sel.len() {
            let chosen = objective(&sel[..k]);
            for alt in 0..12 {
                if sel[..k - 1].contains(&alt) {
                    continue;
                }
                let mut rows = sel[..k - 1].to_vec();
                rows.push(alt);
                assert!(chosen >= objective(&rows) * (1.0 - 1e-9) - 1e-14, "step {k} alt {alt}");
            }
        }
    }

    #[test]
    fn both_criteria_agree_at_r1() {
        let basis = noisy_basis(20, 9, 3.3);
        let r1 = 3;
        let modes = basis.modes(r1);
        let prefix = select_dg(&basis, r1, r1 - 1, &CandidateSet::all(20)).unwrap();
        let argmax = |wide: bool| {
            (0..20)
                .filter(|i| !prefix.contains(i))
                .max_by(|&a, &b| {
                    let det = |i: usize| {
                        let mut rows = prefix.clone();
                        rows.push(i);
                        let c = DMatrix::from_fn(r1, r1, |x, y| modes[(rows[x], y)]);
                        if wide {
                            (&c * c.transpose()).determinant()
                        } else {
                            (c.transpose() * &c).determinant()
                        }
                    };
                    det(a).total_cmp(&det(b))
                })
                .unwrap()
        };
        assert_eq!(argmax(true), argmax(false));
        let full = select_dg(&basis, r1, r1, &CandidateSet::all(20)).unwrap();
        assert_eq!(full[r1 - 1], argmax(true));
    }

    #[test]
    fn respects_exclusion() {
        let basis = noisy_basis(15, 6, 0.9);
        let mut set = CandidateSet::all(15);
        let unrestricted = select_dg(&basis, 3, 5, &set).unwrap();
        for &i in &unrestricted {
            set.included[i] = false;
        }
        let restricted = select_dg(&basis, 3, 5, &set).unwrap();
        assert!(restricted.iter().all(|i| !unrestricted.contains(i)));
    }
}
