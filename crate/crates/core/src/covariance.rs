//! Covariance estimate `C_n` of the scaled OLS estimator `D(n)(β̂ − β)`.
//!
//! With `X_s = X D(n)^{-1}` and the lag cross-moment matrices
//! `B_{k,n} = X_sᵗ J^{(k)} X_s`, the tapered plug-in estimator
//!
//! ```text
//! C_n = D(n) (XᵗX)^{-1} Xᵗ Γ̂*_{n,h} X (XᵗX)^{-1} D(n)
//! ```
//!
//! reduces to `R̂(0)^{-1} M R̂(0)^{-1}` where
//! `M = γ̂*_0 B_{0,n} + Σ_{k≥1} K(k/h) γ̂*_k (B_{k,n} + B_{k,n}ᵗ)`.
//! Only lags with nonzero weight are visited, so the cost is
//! `O(n p² · kept_lags)` with `O(p²)` extra space; the `n × n` Toeplitz
//! matrix is never formed.

use std::io;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{autocovariance, AutocovSequence, Bandwidth, KernelId, TaperKernel};
use crate::linalg;
use crate::model::{unit_gram, DesignMatrix, RegressionFit, ScalingMatrix};

/// Relative eigenvalue tolerance for the positive semi-definite flag.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// `B_{k,n}`: entry `(j, l)` is `ρ̂_{j,l}(k) = Σ_{m=1}^{n-k} x_{m,j} x_{m+k,l} / (d_j d_l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagCrossMoment {
    pub lag: usize,
    pub matrix: DMatrix<f64>,
}

/// Lag-`k` cross-moments of an already normalized design.
fn cross_moment_normalized(xs: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = xs.nrows();
    if k == 0 {
        return unit_gram(xs);
    }
    let head = xs.rows(0, n - k);
    let tail = xs.rows(k, n - k);
    head.tr_mul(&tail)
}

pub fn lag_cross_moment(
    x: &DesignMatrix,
    scaling: &ScalingMatrix,
    k: usize,
) -> Result<LagCrossMoment> {
    if k >= x.n() {
        return Err(Error::LagOutOfRange { lag: k, n: x.n() });
    }
    let xs = x.normalized(scaling)?;
    Ok(LagCrossMoment {
        lag: k,
        matrix: cross_moment_normalized(&xs, k),
    })
}

/// The estimate `C_n` with the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub matrix: DMatrix<f64>,
    pub bandwidth: Bandwidth,
    pub kernel: KernelId,
    /// Minimum eigenvalue is at least `−1e-8 · trace / p`.
    pub psd: bool,
    pub min_eigenvalue: f64,
    pub n: usize,
}

#[derive(Serialize)]
struct Sidecar {
    bandwidth: f64,
    kernel: KernelId,
    psd: bool,
    n: usize,
    p: usize,
}

impl CovarianceEstimate {
    pub fn p(&self) -> usize {
        self.matrix.nrows()
    }

    /// Row-major CSV without header, one matrix row per line.
    pub fn write_csv<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        for row in self.matrix.row_iter() {
            let line: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// JSON sidecar `{bandwidth, kernel, psd, n, p}`.
    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&Sidecar {
            bandwidth: self.bandwidth.h(),
            kernel: self.kernel,
            psd: self.psd,
            n: self.n,
            p: self.p(),
        })
        .expect("sidecar serialization")
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }
}

/// Builds `C_n` from the residual autocovariances of `fit`.
pub fn covariance_estimate(
    fit: &RegressionFit,
    x: &DesignMatrix,
    kernel: &TaperKernel,
    h: &Bandwidth,
) -> Result<CovarianceEstimate> {
    if fit.n() != x.n() || fit.p() != x.p() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            found: fit.n(),
        });
    }
    let residuals = fit.residuals.as_slice();
    let acov = autocovariance(residuals, h.kept_lags().min(x.n() - 1))?;
    covariance_from_autocov(fit, x, &acov, kernel, h)
}

/// Builds `C_n` from a supplied autocovariance sequence (residual-based or,
/// in simulations, computed from the true errors).
pub fn covariance_from_autocov(
    fit: &RegressionFit,
    x: &DesignMatrix,
    acov: &AutocovSequence,
    kernel: &TaperKernel,
    h: &Bandwidth,
) -> Result<CovarianceEstimate> {
    let n = x.n();
    let p = x.p();
    let max_lag = h.kept_lags().min(n - 1);
    if acov.max_lag() < max_lag {
        return Err(Error::LagOutOfRange {
            lag: max_lag,
            n: acov.max_lag() + 1,
        });
    }
    let xs = x.normalized(&fit.scaling)?;
    let gamma = acov.values();

    let mut middle = &fit.r0_hat * (kernel.evaluate(0.0) * gamma[0]);
    for (k, g) in gamma.iter().enumerate().take(max_lag + 1).skip(1) {
        let weight = kernel.evaluate(k as f64 / h.h()) * g;
        if weight == 0.0 {
            continue;
        }
        let b = cross_moment_normalized(&xs, k);
        middle += (&b + b.transpose()) * weight;
    }

    let chol = fit.r0_hat.clone().cholesky().ok_or(Error::SingularR0)?;
    let left = chol.solve(&middle);
    let matrix = linalg::symmetrize(&chol.solve(&left.transpose()));
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularR0);
    }

    let min_eigenvalue = linalg::min_eigenvalue(&matrix);
    let threshold = -PSD_TOLERANCE * matrix.trace().abs() / p as f64;
    Ok(CovarianceEstimate {
        psd: min_eigenvalue >= threshold,
        min_eigenvalue,
        matrix,
        bandwidth: *h,
        kernel: kernel.id(),
        n,
    })
}

/// Symmetric inverse square root `C_n^{-1/2}`.
pub fn whitening_factor(est: &CovarianceEstimate) -> Result<DMatrix<f64>> {
    linalg::inv_sqrt_spd(&est.matrix)
}

/// Applies the whitening factor of a symmetric positive definite matrix.
pub fn whiten(cov: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(linalg::inv_sqrt_spd(cov)? * v)
}
