//! Dense helpers on top of nalgebra: rank, pseudo-inverse, null space.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tolerances;

/// Singular values together with the full right singular basis `V` (n×n).
fn full_svd(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    // pad to a square matrix so that nalgebra returns a complete right basis
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.rows_mut(0, rows).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    (svd.singular_values.iter().copied().collect(), v_t.transpose())
}

/// Numerical rank with relative cutoff [`tolerances::RANK`].
pub fn rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tolerances::RANK * smax).count()
}

/// `B⁺ = Bᵀ(BBᵀ)⁻¹` for a matrix of full row rank.
pub fn pinv_full_row_rank(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r = rank(b);
    if r < b.nrows() {
        return Err(Error::RankDeficient { rank: r, rows: b.nrows() });
    }
    let gram = b * b.transpose();
    let chol = gram.cholesky().ok_or(Error::RankDeficient { rank: r, rows: b.nrows() })?;
    Ok(b.transpose() * chol.inverse())
}

/// Orthonormal basis of `Ker M`, as the columns of an `n × (n − rank)` matrix.
pub fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let (sv, v) = full_svd(m);
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let cols: Vec<usize> = (0..n)
        .filter(|&j| sv.get(j).copied().unwrap_or(0.0) <= tolerances::RANK * smax.max(f64::MIN_POSITIVE))
        .collect();
    DMatrix::from_fn(n, cols.len(), |i, j| v[(i, cols[j])])
}

/// Orthonormal basis of the column space of `M`.
pub fn range_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.is_empty() {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&j| smax > 0.0 && svd.singular_values[j] > tolerances::RANK * smax)
        .collect();
    DMatrix::from_fn(m.nrows(), cols.len(), |i, j| u[(i, cols[j])])
}

/// Inverse of a symmetric positive definite matrix, `None` when numerically singular.
pub fn spd_inverse(c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let sv = c.singular_values();
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let smin = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if smax == 0.0 || smin <= tolerances::RANK * smax {
        return None;
    }
    c.clone().cholesky().map(|ch| ch.inverse())
}

/// Relative Frobenius distance `‖X − Y‖_F / max(1, ‖Y‖_F)`.
pub fn rel_frobenius(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    (x - y).norm() / y.norm().max(1.0)
}

pub fn linf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let z = null_space(&m);
        assert_eq!(z.ncols(), 2);
        assert!((&m * &z).norm() < 1e-12);
        assert!((z.transpose() * &z - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn null_space_of_invertible_is_empty() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        assert_eq!(null_space(&m).ncols(), 0);
    }

    #[test]
    fn pinv_and_rank() {
        let b = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0]);
        let p = pinv_full_row_rank(&b).unwrap();
        assert!((&b * &p - DMatrix::identity(2, 2)).norm() < 1e-12);
        let deficient = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(rank(&deficient), 1);
        assert!(matches!(pinv_full_row_rank(&deficient), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn spd_inverse_detects_singular() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(spd_inverse(&c).is_none());
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let inv = spd_inverse(&c).unwrap();
        assert!((inv[(1, 1)] - 0.25).abs() < 1e-15);
    }
}
