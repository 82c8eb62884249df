//! Regression data model and ordinary least squares with column scaling.
//!
//! Every column `j` of the design carries the scaling `d_j(n) = ‖X_{.,j}‖₂`,
//! and the estimator is studied through `D(n)(β̂ − β)` with
//! `D(n) = diag(d_1(n), …, d_p(n))`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ratio of smallest to largest |diagonal| of the triangular factor below
/// which the design is declared rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-12;

const EXACT_FIT_FACTOR: f64 = 8.0;

/// An `n × p` design matrix with `n >= p >= 1` and finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    entries: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (n, p) = entries.shape();
        if p == 0 || n < p {
            return Err(Error::InvalidShape { n, p });
        }
        for col in 0..p {
            for row in 0..n {
                if !entries[(row, col)].is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        Ok(Self { entries })
    }

    /// Builds a design from column vectors of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let p = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| columns[j][i]))
    }

    pub fn from_row_slice(n: usize, p: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, p, data))
    }

    /// Sample size.
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of regressors.
    pub fn p(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.entries.column(j).iter().copied().collect()
    }

    /// Design restricted to its first `rows` observations.
    pub fn prefix(&self, rows: usize) -> Result<Self> {
        Self::new(self.entries.rows(0, rows.min(self.n())).into_owned())
    }

    /// `X D(n)^{-1}`: every column rescaled to unit euclidean norm.
    pub fn normalized(&self, scaling: &ScalingMatrix) -> Result<DMatrix<f64>> {
        if scaling.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                found: scaling.len(),
            });
        }
        let mut out = self.entries.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col /= scaling.diag[j];
        }
        Ok(out)
    }
}

/// The response vector `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseVector {
    values: DVector<f64>,
}

impl ResponseVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values: DVector::from_vec(values),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }
}

impl From<Vec<f64>> for ResponseVector {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}

/// Diagonal of `D(n)`: the euclidean norms of the design columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingMatrix {
    diag: Vec<f64>,
}

impl ScalingMatrix {
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn get(&self, j: usize) -> f64 {
        self.diag[j]
    }
}

/// Result of an OLS fit.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub beta_hat: DVector<f64>,
    /// `ε̂_i = Y_i − x_iᵗ β̂`.
    pub residuals: DVector<f64>,
    pub scaling: ScalingMatrix,
    /// `R̂(0) = D(n)^{-1} XᵗX D(n)^{-1}`, unit diagonal.
    pub r0_hat: DMatrix<f64>,
}

impl RegressionFit {
    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    pub fn p(&self) -> usize {
        self.beta_hat.len()
    }

    /// The vector `D(n) β̂`.
    pub fn scaled_beta(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.p(),
            self.beta_hat
                .iter()
                .zip(self.scaling.diag())
                .map(|(b, d)| b * d),
        )
    }
}

pub fn column_scalings(x: &DesignMatrix) -> Result<ScalingMatrix> {
    let diag = x
        .entries
        .column_iter()
        .enumerate()
        .map(|(j, col)| {
            let d = col.norm();
            if d > 0.0 {
                Ok(d)
            } else {
                Err(Error::ZeroColumn(j))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalingMatrix { diag })
}

/// Normalized lag-0 Gram matrix of an already column-normalized design, with
/// the diagonal pinned to exactly one.
pub(crate) fn unit_gram(normalized: &DMatrix<f64>) -> DMatrix<f64> {
    let mut gram = normalized.tr_mul(normalized);
    for j in 0..gram.nrows() {
        gram[(j, j)] = 1.0;
    }
    gram
}

/// Ordinary least squares `β̂ = (XᵗX)^{-1} XᵗY`.
///
/// The system is solved through a QR factorization of the column-normalized
/// design `X D(n)^{-1}`, so the rank test is insensitive to column units.
/// Residuals whose norm is below the attainable accuracy of the solve
/// (`8 n ε ‖Y‖`) are rounding noise of an exact fit and are returned as zero.
pub fn fit_ols(x: &DesignMatrix, y: &ResponseVector) -> Result<RegressionFit> {
    if y.len() != x.n() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            found: y.len(),
        });
    }
    if let Some(i) = y.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: i, col: 0 });
    }
    let scaling = column_scalings(x)?;
    let xs = x.normalized(&scaling)?;
    let p = x.p();

    let qr = xs.clone().qr();
    let r = qr.r();
    let diag_abs: Vec<f64> = (0..p).map(|j| r[(j, j)].abs()).collect();
    let max = diag_abs.iter().copied().fold(0.0, f64::max);
    let min = diag_abs.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if !(ratio >= RANK_TOLERANCE) {
        return Err(Error::RankDeficient { ratio });
    }

    let qty = qr.q().tr_mul(&y.values);
    let gamma = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient { ratio })?;
    let beta_hat = DVector::from_iterator(p, gamma.iter().zip(&scaling.diag).map(|(g, d)| g / d));
    let mut residuals = &y.values - &xs * &gamma;
    if residuals.norm() <= EXACT_FIT_FACTOR * x.n() as f64 * f64::EPSILON * y.values.norm() {
        residuals.fill(0.0);
    }
    let r0_hat = unit_gram(&xs);

    Ok(RegressionFit {
        beta_hat,
        residuals,
        scaling,
        r0_hat,
    })
}
