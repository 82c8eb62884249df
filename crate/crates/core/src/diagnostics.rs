//! Finite-sample evidence for the design conditions behind the central
//! limit theorem: column growth, the Lindeberg-type ratio, stability of the
//! normalized lagged cross-products and positive definiteness of `R̂(0)`.
//!
//! The conditions are asymptotic, so everything here is advisory.

use std::io;

use serde::Serialize;

use crate::covariance::lag_cross_moment;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{column_scalings, DesignMatrix};

/// A column is flagged when one observation carries more than this share of
/// its euclidean norm.
pub const LINDEBERG_WARNING: f64 = 0.5;

/// `R̂(0)` is flagged when its smallest eigenvalue drops below this.
pub const R0_EIGENVALUE_WARNING: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoEntry {
    pub j: usize,
    pub l: usize,
    pub k: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignDiagnostics {
    pub n: usize,
    pub p: usize,
    pub d_values: Vec<f64>,
    /// `max_i |x_{i,j}| / d_j(n)`.
    pub lindeberg_ratios: Vec<f64>,
    pub rho_hat: Vec<RhoEntry>,
    pub r0_min_eigenvalue: f64,
    pub warnings: Vec<String>,
}

impl DesignDiagnostics {
    pub fn has_warnings(&self) -> bool {
        !self.warnings.is_empty()
    }

    /// `ρ̂_{j,l}(k)` if it was computed.
    pub fn rho(&self, j: usize, l: usize, k: usize) -> Option<f64> {
        self.rho_hat
            .iter()
            .find(|e| (e.j, e.l, e.k) == (j, l, k))
            .map(|e| e.value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagnostics serialization")
    }
}

pub fn design_diagnostics(x: &DesignMatrix, max_lag: usize) -> Result<DesignDiagnostics> {
    let (n, p) = (x.n(), x.p());
    if max_lag >= n {
        return Err(Error::LagOutOfRange { lag: max_lag, n });
    }
    let scaling = column_scalings(x)?;
    let lindeberg_ratios: Vec<f64> = (0..p)
        .map(|j| x.entries().column(j).amax() / scaling.get(j))
        .collect();

    let mut rho_hat = Vec::with_capacity(p * p * (max_lag + 1));
    let mut r0 = None;
    for k in 0..=max_lag {
        let b = lag_cross_moment(x, &scaling, k)?.matrix;
        for j in 0..p {
            for l in 0..p {
                rho_hat.push(RhoEntry {
                    j,
                    l,
                    k,
                    value: b[(j, l)],
                });
            }
        }
        if k == 0 {
            r0 = Some(b);
        }
    }
    let r0_min_eigenvalue = linalg::min_eigenvalue(&r0.expect("lag 0 is always computed"));

    let mut warnings = Vec::new();
    for (j, ratio) in lindeberg_ratios.iter().enumerate() {
        if *ratio > LINDEBERG_WARNING {
            warnings.push(format!(
                "column {j}: a single observation dominates (max|x|/d = {ratio:.4}); \
                 the Lindeberg-type growth condition is suspect at this n"
            ));
        }
    }
    if r0_min_eigenvalue < R0_EIGENVALUE_WARNING {
        warnings.push(format!(
            "R(0) is nearly singular (min eigenvalue {r0_min_eigenvalue:.3e})"
        ));
    }

    Ok(DesignDiagnostics {
        n,
        p,
        d_values: scaling.diag().to_vec(),
        lindeberg_ratios,
        rho_hat,
        r0_min_eigenvalue,
        warnings,
    })
}

/// `ρ̂_{j,l}(k)` on nested prefixes of the design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoStability {
    pub prefix_n: Vec<usize>,
    pub values: Vec<f64>,
}

impl RhoStability {
    /// CSV `prefix_n,value`.
    pub fn write_csv<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "prefix_n,value")?;
        for (m, v) in self.prefix_n.iter().zip(&self.values) {
            writeln!(out, "{m},{v}")?;
        }
        Ok(())
    }
}

/// Evaluates `ρ̂_{j,l}(k)` on the prefixes of length `⌊i n / splits⌋`,
/// `i = 1..=splits`. A drifting sequence hints that the limit does not exist.
pub fn rho_stability(
    x: &DesignMatrix,
    j: usize,
    l: usize,
    k: usize,
    splits: usize,
) -> Result<RhoStability> {
    if splits < 2 {
        return Err(Error::InvalidArgument(format!(
            "splits must be at least 2, got {splits}"
        )));
    }
    let (n, p) = (x.n(), x.p());
    for idx in [j, l] {
        if idx >= p {
            return Err(Error::IndexOutOfRange { index: idx, p });
        }
    }
    let prefix_n: Vec<usize> = (1..=splits).map(|i| i * n / splits).collect();
    if prefix_n[0] <= k {
        return Err(Error::LagOutOfRange {
            lag: k,
            n: prefix_n[0],
        });
    }
    let values = prefix_n
        .iter()
        .map(|&m| {
            let cols: Vec<Vec<f64>> = [j, l]
                .iter()
                .map(|&c| x.entries().column(c).rows(0, m).iter().copied().collect())
                .collect();
            let sub = DesignMatrix::from_columns(&cols)?;
            let scaling = column_scalings(&sub)?;
            let b = lag_cross_moment(&sub, &scaling, k)?.matrix;
            Ok(if j == l && k == 0 { 1.0 } else { b[(0, 1)] })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RhoStability { prefix_n, values })
}
