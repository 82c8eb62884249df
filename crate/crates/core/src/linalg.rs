use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn min_eigenvalue(sym: &DMatrix<f64>) -> f64 {
    if sym.is_empty() {
        return 0.0;
    }
    sym.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Symmetric inverse square root `V diag(λ^{-1/2}) Vᵗ`; every eigenvalue must
/// exceed `1e-12 · trace / p`.
pub(crate) fn inv_sqrt_spd(sym: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = sym.nrows();
    let eig = sym.clone().symmetric_eigen();
    let floor = 1e-12 * sym.trace() / p as f64;
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !(min > floor) || !(min > 0.0) {
        return Err(Error::NotPositiveDefinite { eigenvalue: min });
    }
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col /= eig.eigenvalues[j].sqrt();
    }
    Ok(symmetrize(&(scaled * v.transpose())))
}
