//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Relative singular-value threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-6;

// Singular quantities come from the symmetric eigendecomposition of the
// smaller Gram matrix: nalgebra's SVD can return inaccurate singular vectors
// for exactly rank-deficient input. Singular values below about 1e-8 of the
// largest are at roundoff level.

/// Singular values of `mat`, sorted in decreasing order.
pub fn singular_values(mat: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = mat.shape();
    if r == 0 || c == 0 {
        return Vec::new();
    }
    let g = if r <= c { mat * mat.transpose() } else { mat.transpose() * mat };
    let mut s: Vec<f64> = g.symmetric_eigenvalues().iter().map(|l| l.max(0.0).sqrt()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Orthonormal basis (as rows) of the row space of `mat`, keeping
/// directions whose singular value exceeds `rel_tol` times the largest.
pub fn row_space_basis(mat: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (r, d) = mat.shape();
    if r == 0 || d == 0 {
        return DMatrix::zeros(0, d);
    }
    let wide = r <= d;
    let g = if wide { mat * mat.transpose() } else { mat.transpose() * mat };
    let eig = g.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lmax = eig.eigenvalues[order[0]];
    if !(lmax > 0.0) {
        return DMatrix::zeros(0, d);
    }
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i].max(0.0).sqrt() > rel_tol * lmax.sqrt())
        .collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), keep.len(), |a, b| eig.eigenvectors[(a, keep[b])]);
    // d × k spanning set of the row space, re-orthonormalized by QR
    let span = if wide { mat.transpose() * vecs } else { vecs };
    let q = span.qr().q();
    q.columns(0, keep.len()).transpose()
}

/// Cholesky factorization of a symmetric positive-definite matrix.
pub fn cholesky(mat: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(mat).ok_or_else(|| {
        Error::SolveFailure("matrix is not numerically positive definite".into())
    })
}

/// Centering matrix H = I - (1/n) 1 1ᵀ.
pub fn centering_matrix(n: usize) -> DMatrix<f64> {
    let inv = 1.0 / n as f64;
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 - inv } else { -inv })
}

/// Computes H·M·H without forming H.
pub fn double_center(mat: &DMatrix<f64>) -> DMatrix<f64> {
    let n = mat.nrows();
    if n == 0 {
        return mat.clone();
    }
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| mat.row(i).sum() / nf).collect();
    let col_means: Vec<f64> = (0..n).map(|j| mat.column(j).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    DMatrix::from_fn(n, n, |i, j| mat[(i, j)] - row_means[i] - col_means[j] + grand)
}

pub fn is_finite(mat: &DMatrix<f64>) -> bool {
    mat.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_deficient_row_space_stays_in_span() {
        // two zero-sum rows spanning one direction
        let a = DMatrix::from_row_slice(2, 4, &[1.0, -1.0, 2.0, -2.0, -0.5, 0.5, -1.0, 1.0]);
        let q = row_space_basis(&a, RANK_TOL);
        assert_eq!(q.nrows(), 1);
        assert!(q.row(0).sum().abs() < 1e-14);
        assert!((&a - &a * q.transpose() * &q).amax() < 1e-14);
        let s = singular_values(&a);
        assert!((s[0] - 12.5f64.sqrt()).abs() < 1e-12 && s[1] < 1e-7);
    }

    #[test]
    fn tall_input_row_space() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, -1.0, -1.0]);
        let q = row_space_basis(&a, RANK_TOL);
        assert_eq!(q.nrows(), 1);
        assert!((q[(0, 0)].abs() - 0.5f64.sqrt()).abs() < 1e-14);
    }
}
