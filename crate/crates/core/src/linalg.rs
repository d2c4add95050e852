//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{Cholesky, Complex, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = Complex { re: 0.0, im: 0.0 };
pub const ONE: C64 = Complex { re: 1.0, im: 0.0 };

/// Returns `(A + A^H) / 2`.
pub fn hermitize(a: &CMat) -> CMat {
    let mut out = a + a.adjoint();
    out.scale_mut(0.5);
    out
}

pub fn real_symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Columns of the returned matrix are the eigenvectors.
pub fn hermitian_eigen(a: &CMat) -> (DVector<f64>, CMat) {
    let eig = hermitize(a).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn hermitian_eigenvalues(a: &CMat) -> DVector<f64> {
    let mut v: Vec<f64> = hermitize(a)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    v.sort_by(|a, b| b.total_cmp(a));
    DVector::from_vec(v)
}

pub fn real_symmetric_eigenvalues(a: &DMatrix<f64>) -> DVector<f64> {
    let mut v: Vec<f64> = real_symmetrize(a)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    v.sort_by(|a, b| b.total_cmp(a));
    DVector::from_vec(v)
}

/// Cholesky factor of the Hermitian part of `a`, or `None` unless it is
/// positive definite. The complex square root never fails, so the pivots
/// are checked explicitly.
pub fn cholesky_hpd(a: &CMat) -> Option<Cholesky<C64, Dyn>> {
    let chol = hermitize(a).cholesky()?;
    let ok = chol
        .l_dirty()
        .diagonal()
        .iter()
        .all(|d| d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-12 * d.re);
    ok.then_some(chol)
}

/// Natural log-determinant of a Hermitian positive-definite matrix.
pub fn logdet_hpd(a: &CMat) -> Result<f64> {
    let chol =
        cholesky_hpd(a).ok_or_else(|| Error::Domain("matrix is not positive definite".into()))?;
    Ok(chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|d| 2.0 * d.re.ln())
        .sum())
}

/// Solves `A X = B` for Hermitian positive-definite `A`.
pub fn solve_hpd(a: &CMat, b: &CMat) -> Option<CMat> {
    cholesky_hpd(a).map(|c| c.solve(b))
}

pub fn trace_re(a: &CMat) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

pub fn frobenius_sq(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn to_complex(a: &DMatrix<f64>) -> CMat {
    a.map(|x| C64::new(x, 0.0))
}

pub fn diag_complex(v: &CVec) -> CMat {
    CMat::from_diagonal(v)
}

/// `diag(s) * A` without forming the diagonal matrix.
pub fn scale_rows(s: &DVector<f64>, a: &CMat) -> CMat {
    let mut out = a.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= C64::new(s[i], 0.0);
    }
    out
}

/// `A * diag(v)` for a complex vector `v`.
pub fn scale_cols(a: &CMat, v: &CVec) -> CMat {
    let mut out = a.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= v[j];
    }
    out
}

pub fn all_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
