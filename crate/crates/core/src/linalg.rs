//! Shared complex linear-algebra helpers.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

/// Columns `idx` of `m` gathered into a new matrix, in the given order.
pub(crate) fn select_columns(m: &DMatrix<Complex64>, idx: &[usize]) -> DMatrix<Complex64> {
    let cols: Vec<DVector<Complex64>> = idx.iter().map(|&j| m.column(j).into_owned()).collect();
    DMatrix::from_columns(&cols)
}

/// Least squares `argmin_X ||A*X - B||_F` via the normal equations.
///
/// Returns `None` when the Gram matrix is not numerically positive definite,
/// i.e. the columns of `A` are (close to) linearly dependent.
pub(crate) fn lstsq(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let gram = a.ad_mul(a);
    let chol = Cholesky::new(gram)?;
    Some(chol.solve(&a.ad_mul(b)))
}

/// Hermitian eigendecomposition with eigenvalues (and matching eigenvector
/// columns) sorted ascending. The input is symmetrized first to remove
/// rounding asymmetry.
pub(crate) fn hermitian_eigen_sorted(h: &DMatrix<Complex64>) -> Result<(DVector<f64>, DMatrix<Complex64>)> {
    let sym = (h + h.adjoint()).map(|z| z * 0.5);
    let eig = sym
        .try_symmetric_eigen(1.0e-13, 10_000)
        .ok_or_else(|| Error::Estimation("Hermitian eigendecomposition did not converge".into()))?;
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let vectors = select_columns(&eig.eigenvectors, &order);
    Ok((values, vectors))
}
