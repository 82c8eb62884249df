//! Taper kernels, empirical autocovariances, the tapered spectral density
//! estimator and the bandwidth heuristic.

use std::f64::consts::PI;
use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat-top fraction of the default kernel: `K(x) = 1` for `|x| < 0.8`.
pub const PAPER_FLAT_RADIUS: f64 = 0.8;

/// Two-sided 5% normal quantile used for the white-noise band.
const WHITE_NOISE_Z: f64 = 1.96;

/// Number of consecutive in-band lags required by [`suggest_bandwidth`].
const BAND_CONFIRMATION_LAGS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelId {
    /// Flat-top trapezoid: 1 on `|x| < 0.8`, `5 − 5|x|` on `[0.8, 1]`.
    Paper,
    /// Triangular kernel `max(0, 1 − |x|)`; positive definite.
    Bartlett,
    /// Indicator of `|x| ≤ 1`. Its Fourier transform is not integrable, so
    /// consistency is not guaranteed; diagnostic use only.
    Rectangular,
}

impl KernelId {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelId::Paper => "paper",
            KernelId::Bartlett => "bartlett",
            KernelId::Rectangular => "rectangular",
        }
    }
}

impl fmt::Display for KernelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(KernelId::Paper),
            "bartlett" | "triangular" => Ok(KernelId::Bartlett),
            "rectangular" => Ok(KernelId::Rectangular),
            other => Err(Error::InvalidArgument(format!("unknown kernel '{other}'"))),
        }
    }
}

/// A symmetric, nonnegative taper with compact support and `K(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TaperKernel {
    id: KernelId,
}

impl TaperKernel {
    pub const PAPER: TaperKernel = TaperKernel {
        id: KernelId::Paper,
    };
    pub const BARTLETT: TaperKernel = TaperKernel {
        id: KernelId::Bartlett,
    };
    pub const RECTANGULAR: TaperKernel = TaperKernel {
        id: KernelId::Rectangular,
    };

    pub fn new(id: KernelId) -> Self {
        Self { id }
    }

    pub fn id(&self) -> KernelId {
        self.id
    }

    /// `K(x) = 0` for `|x| > support_radius()`.
    pub fn support_radius(&self) -> f64 {
        1.0
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let a = x.abs();
        match self.id {
            KernelId::Paper => {
                if a < PAPER_FLAT_RADIUS {
                    1.0
                } else if a <= 1.0 {
                    5.0 - 5.0 * a
                } else {
                    0.0
                }
            }
            KernelId::Bartlett => (1.0 - a).max(0.0),
            KernelId::Rectangular => {
                if a <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Whether the kernel is only meant for comparison runs.
    pub fn is_diagnostic_only(&self) -> bool {
        self.id == KernelId::Rectangular
    }

    /// Smallest conventional bandwidth that gives lags `1..=lags` positive
    /// weight (full weight for the flat-top kernels) and zeroes lag `lags + 1`
    /// when `lags <= 4`.
    pub fn bandwidth_for_lags(&self, lags: usize) -> f64 {
        let m = lags as f64;
        match self.id {
            KernelId::Paper if lags == 0 => 1.0,
            KernelId::Paper => m / PAPER_FLAT_RADIUS,
            KernelId::Bartlett => m + 1.0,
            KernelId::Rectangular => m + 0.5,
        }
    }
}

impl Default for TaperKernel {
    fn default() -> Self {
        Self::PAPER
    }
}

impl From<KernelId> for TaperKernel {
    fn from(id: KernelId) -> Self {
        Self::new(id)
    }
}

/// Taper bandwidth `h_n` together with the number of positive lags
/// `k >= 1` whose weight `K(k/h)` is nonzero for a given kernel and sample
/// size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth {
    h: f64,
    kept_lags: usize,
}

impl Bandwidth {
    pub fn new(h: f64, kernel: &TaperKernel, n: usize) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidBandwidth(h));
        }
        let limit = n.saturating_sub(1);
        let reach = (h * kernel.support_radius()).ceil() as usize;
        let kept_lags = (1..=reach.min(limit))
            .take_while(|&k| kernel.evaluate(k as f64 / h) > 0.0)
            .count();
        Ok(Self { h, kept_lags })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Largest lag carrying nonzero weight; lag 0 is always kept.
    pub fn kept_lags(&self) -> usize {
        self.kept_lags
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcovSource {
    /// `γ̂*_k`, computed from OLS residuals.
    Residuals,
    /// `γ̂_k`, computed from the true errors (simulation only).
    Errors,
}

/// Autocovariances at lags `0..=max_lag`, each normalized by the full sample
/// size `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocovSequence {
    values: Vec<f64>,
    n: usize,
    source: AcovSource,
}

impl AutocovSequence {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn source(&self) -> AcovSource {
        self.source
    }

    pub fn max_lag(&self) -> usize {
        self.values.len() - 1
    }

    pub fn variance(&self) -> f64 {
        self.values[0]
    }

    pub fn with_source(mut self, source: AcovSource) -> Self {
        self.source = source;
        self
    }

    /// Two-column CSV `lag,acov`.
    pub fn write_csv<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "lag,acov")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(out, "{k},{v}")?;
        }
        Ok(())
    }
}

/// `γ̂_k = (1/n) Σ_{j=1}^{n-k} x_j x_{j+k}` for `k = 0..=max_lag`.
pub fn autocovariance(series: &[f64], max_lag: usize) -> Result<AutocovSequence> {
    let n = series.len();
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    if max_lag >= n {
        return Err(Error::LagOutOfRange { lag: max_lag, n });
    }
    let inv_n = 1.0 / n as f64;
    let values = (0..=max_lag)
        .map(|k| {
            series[..n - k]
                .iter()
                .zip(&series[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                * inv_n
        })
        .collect();
    Ok(AutocovSequence {
        values,
        n,
        source: AcovSource::Residuals,
    })
}

/// `K(k/h)` for `k = 0..=max_lag`.
pub fn kernel_weights(kernel: &TaperKernel, h: &Bandwidth, max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|k| kernel.evaluate(k as f64 / h.h()))
        .collect()
}

/// `f*_n(λ) = (1/2π) Σ_{|k|<n} K(k/h) γ̂*_k e^{ikλ}`, evaluated in its real
/// form.
pub fn spectral_density_estimate(
    acov: &AutocovSequence,
    kernel: &TaperKernel,
    h: &Bandwidth,
    lambda: f64,
) -> Result<f64> {
    let needed = h.kept_lags().min(acov.n() - 1);
    if acov.max_lag() < needed {
        return Err(Error::LagOutOfRange {
            lag: needed,
            n: acov.max_lag() + 1,
        });
    }
    let weights = kernel_weights(kernel, h, needed);
    let tail: f64 = (1..=needed)
        .map(|k| weights[k] * acov.values[k] * (k as f64 * lambda).cos())
        .sum();
    Ok((weights[0] * acov.values[0] + 2.0 * tail) / (2.0 * PI))
}

/// Picks a bandwidth from the shape of the autocovariances.
///
/// `k₀` is the smallest lag `k >= 1` such that lags `k..=k+4` (truncated to
/// the available lags) all lie inside the white-noise band
/// `|γ̂_k| <= 1.96 γ̂_0 / √n`. Lags `1..k₀` are treated as significant and the
/// returned bandwidth keeps exactly those with full weight; for the default
/// kernel that is `h = (k₀ − 1) / 0.8`, or `h = 1` (lag 0 only) when
/// `k₀ = 1`. The result is clamped so that `h · radius <= n − 1`.
pub fn suggest_bandwidth(acov: &AutocovSequence, kernel: &TaperKernel) -> Result<Bandwidth> {
    let gamma0 = acov.variance();
    if !(gamma0 > 0.0) {
        return Err(Error::DegenerateSeries);
    }
    let n = acov.n();
    let band = WHITE_NOISE_Z * gamma0 / (n as f64).sqrt();
    let last = acov.max_lag();
    let first_quiet = (1..=last)
        .find(|&k| {
            let end = (k + BAND_CONFIRMATION_LAGS - 1).min(last);
            acov.values[k..=end].iter().all(|g| g.abs() <= band)
        })
        .unwrap_or(last + 1);
    let significant = first_quiet - 1;
    let mut h = kernel.bandwidth_for_lags(significant);
    if n > 1 {
        h = h.min((n - 1) as f64 / kernel.support_radius());
    }
    Bandwidth::new(h, kernel, n)
}

/// Largest lag inspected by [`auto_bandwidth`].
pub const AUTO_MAX_LAG: usize = 50;

/// [`suggest_bandwidth`] applied to the autocovariances of `series` up to lag
/// `min(n − 1, AUTO_MAX_LAG)`.
pub fn auto_bandwidth(series: &[f64], kernel: &TaperKernel) -> Result<Bandwidth> {
    let max_lag = series.len().saturating_sub(1).min(AUTO_MAX_LAG);
    suggest_bandwidth(&autocovariance(series, max_lag)?, kernel)
}

/// Outcome of the bandwidth growth check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandwidthRate {
    /// `h^{1+δ/2} / n^{δ/2}`.
    pub ratio: f64,
    pub warning: bool,
}

/// Sufficient rate for consistency when the errors have a `(2 + δ)`-th
/// moment: `h^{1+δ/2} / n^{δ/2}` should be small. With `δ = 2` this is `h²/n`.
pub fn check_bandwidth_rate(h: &Bandwidth, n: usize, moment_exponent: f64) -> BandwidthRate {
    let half = moment_exponent / 2.0;
    let ratio = h.h().powf(1.0 + half) / (n as f64).powf(half);
    BandwidthRate {
        ratio,
        warning: ratio > 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn brute_force_acov(x: &[f64], k: usize) -> f64 {
        let n = x.len();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if j == i + k {
                    s += x[i] * x[j];
                }
            }
        }
        s / n as f64
    }

    #[test]
    fn alternating_series() {
        let x = [1.0, -1.0, 1.0, -1.0];
        let oracle: Vec<f64> = (0..4).map(|k| brute_force_acov(&x, k)).collect();
        assert_eq!(oracle, vec![1.0, -0.75, 0.5, -0.25]);
        assert_eq!(autocovariance(&x, 3).unwrap().values(), &oracle[..]);
    }

    #[test]
    fn zeros_and_constants() {
        let acov = autocovariance(&[0.0; 6], 5).unwrap();
        assert!(acov.values().iter().all(|v| *v == 0.0));
        let c = 1.5;
        let n = 9;
        let acov = autocovariance(&vec![c; n], n - 1).unwrap();
        for (k, v) in acov.values().iter().enumerate() {
            assert_relative_eq!(*v, c * c * (n - k) as f64 / n as f64, epsilon = 1e-14);
        }
    }

    #[test]
    fn autocovariance_errors() {
        assert_eq!(autocovariance(&[], 0).unwrap_err(), Error::EmptySeries);
        assert_eq!(
            autocovariance(&[1.0, 2.0], 2).unwrap_err(),
            Error::LagOutOfRange { lag: 2, n: 2 }
        );
    }

    #[test]
    fn paper_kernel_values() {
        let k = TaperKernel::PAPER;
        assert_eq!(k.evaluate(0.0), 1.0);
        assert_relative_eq!(k.evaluate(0.9), 0.5, epsilon = 1e-15);
        assert_relative_eq!(k.evaluate(-0.9), 0.5, epsilon = 1e-15);
        assert_eq!(k.evaluate(1.2), 0.0);
        assert_eq!(k.evaluate(0.8), 1.0);
        assert_eq!(k.evaluate(1.0), 0.0);
    }

    #[test]
    fn paper_kernel_h5_keeps_lags_0_to_4() {
        let k = TaperKernel::PAPER;
        let h = Bandwidth::new(5.0, &k, 1000).unwrap();
        let w = kernel_weights(&k, &h, 8);
        assert_eq!(w, vec![1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(h.kept_lags(), 4);
    }

    #[test]
    fn bartlett_h2() {
        let k = TaperKernel::BARTLETT;
        let h = Bandwidth::new(2.0, &k, 100).unwrap();
        assert_eq!(kernel_weights(&k, &h, 3), vec![1.0, 0.5, 0.0, 0.0]);
        assert_eq!(h.kept_lags(), 1);
    }

    #[test]
    fn kept_lags_examples() {
        let k = TaperKernel::PAPER;
        assert_eq!(Bandwidth::new(1.0, &k, 100).unwrap().kept_lags(), 0);
        // 6/6.25 = 0.96 still carries weight 0.2.
        assert_eq!(Bandwidth::new(6.25, &k, 100).unwrap().kept_lags(), 6);
        assert_eq!(Bandwidth::new(50.0, &k, 10).unwrap().kept_lags(), 9);
        let r = TaperKernel::RECTANGULAR;
        assert_eq!(Bandwidth::new(3.0, &r, 100).unwrap().kept_lags(), 3);
        assert!(Bandwidth::new(0.0, &k, 10).is_err());
        assert!(Bandwidth::new(f64::NAN, &k, 10).is_err());
    }

    #[test]
    fn bandwidth_for_lags_matches_flat_region() {
        let k = TaperKernel::PAPER;
        assert_eq!(k.bandwidth_for_lags(4), 5.0);
        assert_eq!(k.bandwidth_for_lags(5), 6.25);
        assert_eq!(k.bandwidth_for_lags(0), 1.0);
        for kernel in [
            TaperKernel::PAPER,
            TaperKernel::BARTLETT,
            TaperKernel::RECTANGULAR,
        ] {
            for m in 0..5 {
                let h = Bandwidth::new(kernel.bandwidth_for_lags(m), &kernel, 1000).unwrap();
                assert_eq!(h.kept_lags(), m, "{:?} m={m}", kernel.id());
            }
        }
    }

    #[test]
    fn spectral_density_trivial_cases() {
        let k = TaperKernel::PAPER;
        let zeros = autocovariance(&[0.0; 10], 9).unwrap();
        let h = Bandwidth::new(5.0, &k, 10).unwrap();
        for lambda in [-PI, -1.0, 0.0, 2.0, PI] {
            assert_eq!(
                spectral_density_estimate(&zeros, &k, &h, lambda).unwrap(),
                0.0
            );
        }
        let white = AutocovSequence {
            values: vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            n: 100,
            source: AcovSource::Residuals,
        };
        for lambda in [-PI, 0.3, PI] {
            assert_relative_eq!(
                spectral_density_estimate(&white, &k, &h, lambda).unwrap(),
                1.0 / (2.0 * PI),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn spectral_density_alternating_at_pi() {
        let k = TaperKernel::PAPER;
        let acov = autocovariance(&[1.0, -1.0, 1.0, -1.0], 3).unwrap();
        let h = Bandwidth::new(5.0, &k, 4).unwrap();
        // Complex-exponential oracle over k = -(n-1)..=(n-1).
        let g = [1.0, -0.75, 0.5, -0.25];
        let (mut re, mut im) = (0.0, 0.0);
        for lag in -3i32..=3 {
            let w = k.evaluate(lag as f64 / 5.0) * g[lag.unsigned_abs() as usize];
            re += w * (lag as f64 * PI).cos();
            im += w * (lag as f64 * PI).sin();
        }
        assert!(im.abs() < 1e-12);
        let expected = re / (2.0 * PI);
        assert_relative_eq!(expected, 4.0 / (2.0 * PI), epsilon = 1e-12);
        assert_relative_eq!(
            spectral_density_estimate(&acov, &k, &h, PI).unwrap(),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn spectral_density_requires_enough_lags() {
        let acov = autocovariance(&[1.0; 20], 2).unwrap();
        let h = Bandwidth::new(5.0, &TaperKernel::PAPER, 20).unwrap();
        assert!(spectral_density_estimate(&acov, &TaperKernel::PAPER, &h, 0.0).is_err());
    }

    #[test]
    fn bandwidth_rate_examples() {
        let k = TaperKernel::PAPER;
        let r = check_bandwidth_rate(&Bandwidth::new(5.0, &k, 1000).unwrap(), 1000, 2.0);
        assert_relative_eq!(r.ratio, 0.025, epsilon = 1e-15);
        assert!(!r.warning);
        let r = check_bandwidth_rate(&Bandwidth::new(300.0, &k, 300).unwrap(), 300, 2.0);
        assert_relative_eq!(r.ratio, 300.0, epsilon = 1e-12);
        assert!(r.warning);
        let r = check_bandwidth_rate(&Bandwidth::new(6.25, &k, 200).unwrap(), 200, 2.0);
        assert_relative_eq!(r.ratio, 6.25 * 6.25 / 200.0, epsilon = 1e-15);
        assert!((r.ratio - 0.195).abs() < 1e-3);
        assert!(!r.warning);
    }

    #[test]
    fn suggest_bandwidth_on_constructed_sequences() {
        let k = TaperKernel::PAPER;
        let n = 400;
        // band = 1.96 / 20 = 0.098
        let mut values = vec![1.0, 0.6, 0.35, 0.2, 0.12];
        values.extend(std::iter::repeat_n(0.01, 20));
        let acov = AutocovSequence {
            values,
            n,
            source: AcovSource::Residuals,
        };
        let h = suggest_bandwidth(&acov, &k).unwrap();
        assert_eq!(h.h(), 5.0);
        assert_eq!(h.kept_lags(), 4);

        // An isolated spike within the confirmation window delays k0.
        let mut values = vec![1.0, 0.6, 0.05, 0.0, 0.0, 0.2];
        values.extend(std::iter::repeat_n(0.0, 10));
        let acov = AutocovSequence {
            values,
            n,
            source: AcovSource::Residuals,
        };
        assert_eq!(suggest_bandwidth(&acov, &k).unwrap().h(), 6.25);
        assert_eq!(
            suggest_bandwidth(&acov, &TaperKernel::BARTLETT)
                .unwrap()
                .h(),
            6.0
        );

        let white = AutocovSequence {
            values: vec![2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            n,
            source: AcovSource::Residuals,
        };
        let h = suggest_bandwidth(&white, &k).unwrap();
        assert_eq!((h.h(), h.kept_lags()), (1.0, 0));
    }

    #[test]
    fn suggest_bandwidth_clamps_and_rejects_degenerate() {
        let zeros = autocovariance(&[0.0; 50], 10).unwrap();
        assert_eq!(
            suggest_bandwidth(&zeros, &TaperKernel::PAPER).unwrap_err(),
            Error::DegenerateSeries
        );
        // Every lag significant on a short constant-sign series: clamp to n-1.
        let acov = autocovariance(&[1.0; 6], 5).unwrap();
        let h = suggest_bandwidth(&acov, &TaperKernel::PAPER).unwrap();
        assert!(h.h() * TaperKernel::PAPER.support_radius() <= 5.0);
    }

    #[test]
    fn csv_output() {
        let acov = autocovariance(&[1.0, -1.0, 1.0, -1.0], 3).unwrap();
        let mut buf = Vec::new();
        acov.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "lag,acov\n0,1\n1,-0.75\n2,0.5\n3,-0.25\n"
        );
    }

    fn toeplitz_min_eig(seq: &[f64]) -> f64 {
        let m = seq.len();
        let t = nalgebra::DMatrix::from_fn(m, m, |i, j| seq[i.abs_diff(j)]);
        t.symmetric_eigenvalues().min()
    }

    proptest! {
        #[test]
        fn weights_bounded(h in 0.1f64..40.0, id in 0usize..3) {
            let kernel = TaperKernel::new([KernelId::Paper, KernelId::Bartlett, KernelId::Rectangular][id]);
            let bw = Bandwidth::new(h, &kernel, 500).unwrap();
            let w = kernel_weights(&kernel, &bw, 60);
            prop_assert_eq!(w[0], 1.0);
            prop_assert!(w.iter().all(|v| (0.0..=1.0).contains(v)));
            for x in [0.3, 0.85, 1.0, 2.5] {
                prop_assert_eq!(kernel.evaluate(x), kernel.evaluate(-x));
            }
        }

        #[test]
        fn matches_brute_force(x in prop::collection::vec(-5.0f64..5.0, 1..120)) {
            let max_lag = x.len() - 1;
            let acov = autocovariance(&x, max_lag).unwrap();
            for k in 0..=max_lag {
                let oracle = brute_force_acov(&x, k);
                prop_assert!((acov.values()[k] - oracle).abs() <= 1e-12 * oracle.abs().max(acov.values()[0]));
                prop_assert!(acov.values()[k].abs() <= acov.values()[0] * (1.0 + 1e-12));
            }
        }

        #[test]
        fn spectral_density_integrates_to_variance(
            x in prop::collection::vec(-5.0f64..5.0, 20..200),
            h in 1.0f64..15.0,
            id in 0usize..3,
        ) {
            let kernel = TaperKernel::new([KernelId::Paper, KernelId::Bartlett, KernelId::Rectangular][id]);
            let n = x.len();
            let bw = Bandwidth::new(h, &kernel, n).unwrap();
            let acov = autocovariance(&x, bw.kept_lags()).unwrap();
            let points = 4096;
            let step = 2.0 * PI / points as f64;
            let mut integral = 0.0;
            for i in 0..=points {
                let lambda = -PI + i as f64 * step;
                let f = spectral_density_estimate(&acov, &kernel, &bw, lambda).unwrap();
                integral += if i == 0 || i == points { 0.5 * f } else { f };
            }
            integral *= step;
            prop_assume!(acov.variance() > 0.0);
            prop_assert!((integral - acov.variance()).abs() <= 1e-6 * acov.variance());
        }

        #[test]
        fn bartlett_taper_is_positive_definite(
            x in prop::collection::vec(-5.0f64..5.0, 30..250),
            h in 1.0f64..30.0,
            m in 2usize..200,
        ) {
            let kernel = TaperKernel::BARTLETT;
            let n = x.len();
            let m = m.min(n);
            let acov = autocovariance(&x, m - 1).unwrap();
            let bw = Bandwidth::new(h, &kernel, n).unwrap();
            let w = kernel_weights(&kernel, &bw, m - 1);
            let tapered: Vec<f64> = w.iter().zip(acov.values()).map(|(a, b)| a * b).collect();
            prop_assert!(toeplitz_min_eig(&tapered) >= -1e-8 * acov.variance());
        }
    }
}
