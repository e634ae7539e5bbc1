//! Small dense kernels shared across modules.

use faer::linalg::matmul::matmul;
use faer::prelude::*;
use faer::traits::Conjugate;
use faer::{Accum, Side};

use crate::error::{Error, Result};

pub(crate) fn mm<L, R>(a: MatRef<'_, L>, b: MatRef<'_, R>) -> Mat<c64>
where
    L: Conjugate<Canonical = c64>,
    R: Conjugate<Canonical = c64>,
{
    let mut out = Mat::<c64>::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, c64::new(1.0, 0.0), Par::Seq);
    out
}

/// `dst += alpha * a * b`
pub(crate) fn mm_acc<L, R>(dst: MatMut<'_, c64>, alpha: c64, a: MatRef<'_, L>, b: MatRef<'_, R>)
where
    L: Conjugate<Canonical = c64>,
    R: Conjugate<Canonical = c64>,
{
    matmul(dst, Accum::Add, a, b, alpha, Par::Seq);
}

pub(crate) fn adjoint(a: MatRef<'_, c64>) -> Mat<c64> {
    a.adjoint().to_owned()
}

pub(crate) fn scaled(a: MatRef<'_, c64>, s: c64) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub(crate) fn frobenius(a: MatRef<'_, c64>) -> f64 {
    a.norm_l2()
}

pub(crate) fn max_abs(a: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub(crate) fn hermiticity_defect(a: MatRef<'_, c64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            acc += (a[(i, j)] - a[(j, i)].conj()).norm_sqr();
        }
    }
    acc.sqrt()
}

pub(crate) fn trace(a: MatRef<'_, c64>) -> c64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// `Tr(a b)` without forming the product.
pub(crate) fn trace_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> c64 {
    let mut acc = c64::new(0.0, 0.0);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Hilbert–Schmidt inner product `Tr(a† b)`.
pub(crate) fn hs_inner(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> c64 {
    let mut acc = c64::new(0.0, 0.0);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)].conj() * b[(i, j)];
        }
    }
    acc
}

pub(crate) fn is_finite(a: MatRef<'_, c64>) -> bool {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let z = a[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return false;
            }
        }
    }
    true
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending.
pub(crate) fn hermitian_eigen(a: MatRef<'_, c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    let values = (0..a.nrows()).map(|i| evd.S()[i].re).collect();
    Ok((values, evd.U().to_owned()))
}

pub(crate) fn hermitian_eigenvalues(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Decomposition(format!("{e:?}")))
}

pub(crate) fn singular_values(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    a.singular_values()
        .map_err(|e| Error::Decomposition(format!("{e:?}")))
}

/// Orthonormal basis (as columns) of the right null space of `a`.
///
/// A singular value counts as zero when it is at most `threshold`.
pub(crate) fn null_space(a: MatRef<'_, c64>, threshold: f64) -> Result<Mat<c64>> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return Ok(Mat::identity(n, n));
    }
    let svd = if a.nrows() >= n { a.thin_svd() } else { a.svd() }
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    let s = svd.S();
    let k = a.nrows().min(n);
    let rank = (0..k).filter(|&i| s[i].re > threshold).count();
    Ok(svd.V().subcols(rank, n - rank).to_owned())
}

/// Projector `V V†` onto the column span of an orthonormal `V`.
pub(crate) fn projector(v: MatRef<'_, c64>) -> Mat<c64> {
    mm(v, v.adjoint())
}

/// Largest deviation of `V† V` from the identity.
pub(crate) fn orthonormality_defect(v: MatRef<'_, c64>) -> f64 {
    let g = mm(v.adjoint(), v);
    let mut worst = 0.0f64;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - c64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Re-orthonormalise a set of columns (thin QR), keeping their span.
pub(crate) fn orthonormalize(v: MatRef<'_, c64>) -> Mat<c64> {
    if v.ncols() == 0 {
        return v.to_owned();
    }
    v.qr().compute_thin_Q()
}

/// Column-stacking vectorisation.
pub(crate) fn vec_of(a: MatRef<'_, c64>) -> Col<c64> {
    let (m, n) = (a.nrows(), a.ncols());
    Col::from_fn(m * n, |k| a[(k % m, k / m)])
}

pub(crate) fn unvec(v: ColRef<'_, c64>, n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| v[j * n + i])
}
