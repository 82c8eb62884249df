//! Monte Carlo level/power studies under a dependent, non-mixing error
//! process.
//!
//! Errors are `ε_i = σ Φ^{-1}(Z_i)` where `Z_1 ~ U[0,1]` and
//! `Z_{k+1} = (Z_k + η_{k+1}) / 2` with `η` i.i.d. Bernoulli(1/2). The chain
//! is stationary with uniform marginals, so every `ε_i ~ N(0, σ²)`, but the
//! sequence is not Gaussian.
//!
//! Two regression models are available, both with `β_0 = 3` by default:
//!
//! * model 1: `Y_i = β_0 + β_1 (i² + X_i) + ε_i`, tested with `T` on `β_1`;
//! * model 2: `Y_i = β_0 + β_1 (log i + sin i + X_i) + β_2 i + ε_i`, tested
//!   jointly on `(β_1, β_2)` with `Ξ`.
//!
//! `X_i` is a stationary Gaussian AR(1) independent of the errors.
//!
//! Replication `r` draws its design from ChaCha stream `2r` and its errors
//! from stream `2r + 1` of the generator seeded with `seed`, so results do
//! not depend on scheduling.

use std::fmt::Write as _;
use std::io;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::covariance::{covariance_estimate, covariance_from_autocov, CovarianceEstimate};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::inference::{joint_test, t_test};
use crate::kernels::{auto_bandwidth, autocovariance, AcovSource, Bandwidth, TaperKernel};
use crate::model::{fit_ols, DesignMatrix, RegressionFit, ResponseVector};

pub const DEFAULT_SIGMA2: f64 = 25.0;
pub const DEFAULT_BETA0: f64 = 3.0;
pub const DEFAULT_AR_COEFFICIENT: f64 = 0.5;
pub const DEFAULT_AR_INNOVATION_VARIANCE: f64 = 9.0;

const Z_CLAMP: f64 = 1e-15;

/// A generator of stationary error sequences.
pub trait ErrorProcess: Sync {
    fn generate(&self, n: usize, rng: &mut dyn RngCore) -> Vec<f64>;
}

/// The halving Markov chain mapped through the `N(0, σ²)` quantile function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorProcessSpec {
    sigma2: f64,
}

impl ErrorProcessSpec {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "error variance must be positive, got {sigma2}"
            )));
        }
        Ok(Self { sigma2 })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// The underlying uniform chain `Z_1, …, Z_n`.
    pub fn chain(&self, n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
        let mut z = Vec::with_capacity(n);
        if n == 0 {
            return z;
        }
        let mut current: f64 = rng.random();
        z.push(current);
        for _ in 1..n {
            let eta = if rng.random::<bool>() { 1.0 } else { 0.0 };
            current = 0.5 * (current + eta);
            z.push(current);
        }
        z
    }
}

impl Default for ErrorProcessSpec {
    fn default() -> Self {
        Self {
            sigma2: DEFAULT_SIGMA2,
        }
    }
}

impl ErrorProcess for ErrorProcessSpec {
    fn generate(&self, n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
        let sigma = self.sigma2.sqrt();
        self.chain(n, rng)
            .into_iter()
            .map(|z| sigma * crate::inference::normal_quantile(z.clamp(Z_CLAMP, 1.0 - Z_CLAMP)))
            .collect()
    }
}

pub fn simulate_errors(spec: &ErrorProcessSpec, n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    spec.generate(n, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    Model1,
    Model2,
}

impl ModelId {
    pub fn p(self) -> usize {
        match self {
            ModelId::Model1 => 2,
            ModelId::Model2 => 3,
        }
    }

    /// The test the model is studied with.
    pub fn default_test(self) -> TestKind {
        match self {
            ModelId::Model1 => TestKind::TOnBeta1,
            ModelId::Model2 => TestKind::JointBeta1Beta2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub model: ModelId,
    /// `(β_0, β_1)` for model 1, `(β_0, β_1, β_2)` for model 2.
    pub beta: Vec<f64>,
    pub n: usize,
    /// Autoregressive coefficient of the design process `X_i`.
    pub design_ar_coefficient: f64,
    /// Innovation variance of `X_i`; the stationary variance is
    /// `v / (1 − a²)`.
    pub design_innovation_variance: f64,
}

impl ModelSpec {
    pub fn new(model: ModelId, beta: Vec<f64>, n: usize) -> Result<Self> {
        let spec = Self {
            model,
            beta,
            n,
            design_ar_coefficient: DEFAULT_AR_COEFFICIENT,
            design_innovation_variance: DEFAULT_AR_INNOVATION_VARIANCE,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn model1(beta1: f64, n: usize) -> Self {
        Self::new(ModelId::Model1, vec![DEFAULT_BETA0, beta1], n).expect("valid model 1")
    }

    pub fn model2(beta1: f64, beta2: f64, n: usize) -> Self {
        Self::new(ModelId::Model2, vec![DEFAULT_BETA0, beta1, beta2], n).expect("valid model 2")
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.len() != self.model.p() {
            return Err(Error::DimensionMismatch {
                expected: self.model.p(),
                found: self.beta.len(),
            });
        }
        if self.n < self.model.p() {
            return Err(Error::InvalidShape {
                n: self.n,
                p: self.model.p(),
            });
        }
        if !(self.design_ar_coefficient.abs() < 1.0) || !(self.design_innovation_variance > 0.0) {
            return Err(Error::InvalidArgument(
                "design AR(1) needs |coefficient| < 1 and positive variance".into(),
            ));
        }
        Ok(())
    }
}

/// Gaussian AR(1) `X_i = a X_{i−1} + v^{1/2} ξ_i`, started from its
/// stationary law.
pub fn simulate_ar_process(spec: &ModelSpec, rng: &mut dyn RngCore) -> Vec<f64> {
    let a = spec.design_ar_coefficient;
    let innovation_sd = spec.design_innovation_variance.sqrt();
    let sd = innovation_sd / (1.0 - a * a).sqrt();
    let mut out = Vec::with_capacity(spec.n);
    let mut current = 0.0;
    for i in 0..spec.n {
        let xi: f64 = rng.sample(StandardNormal);
        current = if i == 0 {
            sd * xi
        } else {
            a * current + innovation_sd * xi
        };
        out.push(current);
    }
    out
}

/// Deterministic design columns given a realization of `X_i`.
pub fn design_from_process(spec: &ModelSpec, process: &[f64]) -> Result<DesignMatrix> {
    if process.len() != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            found: process.len(),
        });
    }
    let ones = vec![1.0; spec.n];
    let index = |i: usize| (i + 1) as f64;
    let columns = match spec.model {
        ModelId::Model1 => vec![
            ones,
            process
                .iter()
                .enumerate()
                .map(|(i, x)| index(i).powi(2) + x)
                .collect(),
        ],
        ModelId::Model2 => vec![
            ones,
            process
                .iter()
                .enumerate()
                .map(|(i, x)| index(i).ln() + index(i).sin() + x)
                .collect(),
            (0..spec.n).map(index).collect(),
        ],
    };
    DesignMatrix::from_columns(&columns)
}

pub fn simulate_design(spec: &ModelSpec, rng: &mut dyn RngCore) -> Result<DesignMatrix> {
    design_from_process(spec, &simulate_ar_process(spec, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// `T` statistic for `H_0: β_1 = 0`.
    TOnBeta1,
    /// `Ξ` statistic for `H_0: β_1 = β_2 = 0`.
    JointBeta1Beta2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthChoice {
    /// Chosen per replication from the residual autocovariances.
    Auto,
    Fixed(f64),
}

impl BandwidthChoice {
    pub fn label(&self) -> String {
        match self {
            BandwidthChoice::Auto => "auto".into(),
            BandwidthChoice::Fixed(h) => h.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub model: ModelSpec,
    pub test: TestKind,
    pub bandwidth: BandwidthChoice,
    pub kernel: TaperKernel,
    pub errors: ErrorProcessSpec,
    pub replications: u64,
    pub seed: u64,
    pub execution: Execution,
}

impl MonteCarloConfig {
    /// The model's own test, default error process, parallel execution.
    pub fn new(model: ModelSpec, h: f64, replications: u64, seed: u64) -> Self {
        Self {
            test: model.model.default_test(),
            model,
            bandwidth: BandwidthChoice::Fixed(h),
            kernel: TaperKernel::PAPER,
            errors: ErrorProcessSpec::default(),
            replications,
            seed,
            execution: Execution::Parallel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.replications == 0 {
            return Err(Error::InvalidArgument(
                "replications must be at least 1".into(),
            ));
        }
        if let BandwidthChoice::Fixed(h) = self.bandwidth {
            Bandwidth::new(h, &self.kernel, self.model.n)?;
        }
        match (self.test, self.model.model) {
            (TestKind::JointBeta1Beta2, ModelId::Model1) => Err(Error::InvalidArgument(
                "model 1 has no beta_2; use the t test".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Named substreams of a replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Design = 0,
    Errors = 1,
}

/// Independent generator for `(seed, replication, stream)`.
pub fn substream(seed: u64, replication: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication.wrapping_mul(2).wrapping_add(stream as u64));
    rng
}

/// One replication's simulated data, with the true errors kept for the
/// known-errors oracle path.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationData {
    pub design: DesignMatrix,
    pub response: ResponseVector,
    pub errors: Vec<f64>,
}

pub fn replication_data(config: &MonteCarloConfig, replication: u64) -> Result<ReplicationData> {
    let spec = &config.model;
    let design = simulate_design(
        spec,
        &mut substream(config.seed, replication, Stream::Design),
    )?;
    let errors = config.errors.generate(
        spec.n,
        &mut substream(config.seed, replication, Stream::Errors),
    );
    let mean = design.entries() * nalgebra::DVector::from_column_slice(&spec.beta);
    let response = ResponseVector::new(mean.iter().zip(&errors).map(|(m, e)| m + e).collect());
    Ok(ReplicationData {
        design,
        response,
        errors,
    })
}

/// `C_n` built from the true errors' autocovariances `γ̂_k` instead of the
/// residual ones.
pub fn known_errors_covariance(
    data: &ReplicationData,
    fit: &RegressionFit,
    kernel: &TaperKernel,
    h: &Bandwidth,
) -> Result<CovarianceEstimate> {
    let n = data.errors.len();
    let acov =
        autocovariance(&data.errors, h.kept_lags().min(n - 1))?.with_source(AcovSource::Errors);
    covariance_from_autocov(fit, &data.design, &acov, kernel, h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Rejected,
    Accepted,
    Failed,
}

fn run_replication(config: &MonteCarloConfig, replication: u64) -> Result<Outcome> {
    let data = replication_data(config, replication)?;
    let fit = fit_ols(&data.design, &data.response)?;
    let h = match config.bandwidth {
        BandwidthChoice::Fixed(h) => Bandwidth::new(h, &config.kernel, config.model.n)?,
        BandwidthChoice::Auto => auto_bandwidth(fit.residuals.as_slice(), &config.kernel)?,
    };
    let est = covariance_estimate(&fit, &data.design, &config.kernel, &h)?;
    let rejected = match config.test {
        TestKind::TOnBeta1 => t_test(&fit, &est, 1).map(|t| t.reject_at_5pct),
        TestKind::JointBeta1Beta2 => joint_test(&fit, &est, &[1, 2]).map(|t| t.reject_at_5pct),
    };
    match rejected {
        Ok(true) => Ok(Outcome::Rejected),
        Ok(false) => Ok(Outcome::Accepted),
        Err(Error::NonPositiveVariance { .. } | Error::NotPositiveDefinite { .. }) => {
            Ok(Outcome::Failed)
        }
        Err(e) => Err(e),
    }
}

/// Estimated rejection frequency with its binomial standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloResult {
    pub model: ModelId,
    pub test: TestKind,
    pub n: usize,
    pub bandwidth: String,
    pub kernel: String,
    pub beta: Vec<f64>,
    pub seed: u64,
    pub replications: u64,
    pub rejections: u64,
    /// Replications whose covariance estimate could not be used.
    pub failures: u64,
    pub rejection_rate: f64,
    pub standard_error: f64,
}

pub fn run_level_power(config: &MonteCarloConfig) -> Result<MonteCarloResult> {
    config.validate()?;
    let outcomes = map_indexed(config.replications, config.execution, |r| {
        run_replication(config, r)
    });
    let (mut rejections, mut failures) = (0u64, 0u64);
    for outcome in outcomes {
        match outcome? {
            Outcome::Rejected => rejections += 1,
            Outcome::Failed => failures += 1,
            Outcome::Accepted => {}
        }
    }
    let total = config.replications as f64;
    let rate = rejections as f64 / total;
    Ok(MonteCarloResult {
        model: config.model.model,
        test: config.test,
        n: config.model.n,
        bandwidth: config.bandwidth.label(),
        kernel: config.kernel.id().to_string(),
        beta: config.model.beta.clone(),
        seed: config.seed,
        replications: config.replications,
        rejections,
        failures,
        rejection_rate: rate,
        standard_error: (rate * (1.0 - rate) / total).sqrt(),
    })
}

pub const TABLE_HEADER: &str = "n,h,kernel,beta,N,rejection_rate,std_error,failures";

fn beta_label(beta: &[f64]) -> String {
    beta.iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

/// CSV table, one row per result; `beta` entries are `;`-separated.
pub fn write_table<W: io::Write>(results: &[MonteCarloResult], mut out: W) -> io::Result<()> {
    writeln!(out, "{TABLE_HEADER}")?;
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.n,
            r.bandwidth,
            r.kernel,
            beta_label(&r.beta),
            r.replications,
            r.rejection_rate,
            r.standard_error,
            r.failures
        )?;
    }
    Ok(())
}

/// Aligned plain-text rendering of the same table.
pub fn format_table(results: &[MonteCarloResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>6} {:>6} {:>11} {:>16} {:>6} {:>9} {:>9} {:>8}",
        "n", "h", "kernel", "beta", "N", "rate", "se", "failures"
    );
    for r in results {
        let _ = writeln!(
            s,
            "{:>6} {:>6} {:>11} {:>16} {:>6} {:>9.4} {:>9.4} {:>8}",
            r.n,
            r.bandwidth,
            r.kernel,
            beta_label(&r.beta),
            r.replications,
            r.rejection_rate,
            r.standard_error,
            r.failures
        );
    }
    s
}
