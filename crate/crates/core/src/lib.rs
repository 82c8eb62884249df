//! Ordinary least squares inference for linear models with short-range
//! dependent stationary errors.
//!
//! The pipeline is: fit OLS ([`model::fit_ols`]), estimate the residual
//! autocovariances ([`kernels::autocovariance`]), choose a taper bandwidth
//! ([`kernels::suggest_bandwidth`] or an explicit value), build the
//! covariance estimate of the scaled estimator `D(n)(β̂ − β)`
//! ([`covariance::covariance_estimate`]) and run corrected tests
//! ([`inference::t_test`], [`inference::joint_test`]).
//!
//! The [`simulation`] module regenerates level/power studies under a
//! dependent Markov-chain error process. Replications run on rayon when the
//! `parallel` feature is enabled (the default) and sequentially otherwise;
//! both paths produce bit-identical results.

// `!(x > y)` is used deliberately so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod inference;
pub mod kernels;
pub mod model;
pub mod simulation;

mod linalg;

pub use covariance::{
    covariance_estimate, lag_cross_moment, whitening_factor, CovarianceEstimate, LagCrossMoment,
};
pub use diagnostics::{design_diagnostics, rho_stability, DesignDiagnostics};
pub use error::{Error, Result};
pub use exec::Execution;
pub use inference::{
    chi_square_sf, joint_test, normal_cdf, normal_quantile, t_test, JointTest, UnivariateTest,
};
pub use kernels::{
    auto_bandwidth, autocovariance, check_bandwidth_rate, kernel_weights,
    spectral_density_estimate, suggest_bandwidth, AutocovSequence, Bandwidth, KernelId,
    TaperKernel,
};
pub use model::{
    column_scalings, fit_ols, DesignMatrix, RegressionFit, ResponseVector, ScalingMatrix,
};
