//! Corrected Student-type and chi-square tests built on `C_n`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::gamma_ur;

use crate::covariance::{whiten, CovarianceEstimate};
use crate::error::{Error, Result};
use crate::model::RegressionFit;

/// Nominal test level.
pub const LEVEL: f64 = 0.05;

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile; `p` is clamped to `[1e-300, 1 − 1e-16]`.
pub fn normal_quantile(p: f64) -> f64 {
    let p = p.clamp(1e-300, 1.0 - 1e-16);
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Upper tail `P(χ²_dof > x)`.
pub fn chi_square_sf(x: f64, dof: u32) -> f64 {
    assert!(dof >= 1, "chi-square needs at least one degree of freedom");
    if !(x > 0.0) {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma_ur(f64::from(dof) / 2.0, x / 2.0)
}

/// `T_{j,n} = d_j(n) β̂_j / √c_{n,(j,j)}` with a two-sided normal p-value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnivariateTest {
    pub index: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub reject_at_5pct: bool,
}

/// `Ξ = ‖C_{n,p₀}^{-1/2} (d_{j_i}(n) β̂_{j_i})_i‖²` against `χ²(p₀)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointTest {
    pub indices: Vec<usize>,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub reject_at_5pct: bool,
    pub components: Vec<f64>,
}

fn check_index(index: usize, p: usize) -> Result<()> {
    if index >= p {
        Err(Error::IndexOutOfRange { index, p })
    } else {
        Ok(())
    }
}

pub fn t_test(fit: &RegressionFit, est: &CovarianceEstimate, j: usize) -> Result<UnivariateTest> {
    check_index(j, fit.p())?;
    let variance = est.matrix[(j, j)];
    if !(variance > 0.0) {
        return Err(Error::NonPositiveVariance {
            index: j,
            value: variance,
        });
    }
    let statistic = fit.scaling.get(j) * fit.beta_hat[j] / variance.sqrt();
    let p_value = (2.0 * normal_cdf(-statistic.abs())).min(1.0);
    Ok(UnivariateTest {
        index: j,
        statistic,
        p_value,
        reject_at_5pct: p_value < LEVEL,
    })
}

pub fn joint_test(
    fit: &RegressionFit,
    est: &CovarianceEstimate,
    indices: &[usize],
) -> Result<JointTest> {
    if indices.is_empty() {
        return Err(Error::EmptyIndexSet);
    }
    for &j in indices {
        check_index(j, fit.p())?;
    }
    let p0 = indices.len();
    let sub = DMatrix::from_fn(p0, p0, |a, b| est.matrix[(indices[a], indices[b])]);
    let scaled = DVector::from_iterator(
        p0,
        indices
            .iter()
            .map(|&j| fit.scaling.get(j) * fit.beta_hat[j]),
    );
    let z = whiten(&sub, &scaled)?;
    let statistic = z.norm_squared();
    let p_value = chi_square_sf(statistic, p0 as u32);
    Ok(JointTest {
        indices: indices.to_vec(),
        statistic,
        dof: p0,
        p_value,
        reject_at_5pct: p_value < LEVEL,
        components: z.iter().copied().collect(),
    })
}

/// JSON record of a test together with the covariance configuration.
pub fn report_json<T: Serialize>(test: &T, est: &CovarianceEstimate) -> serde_json::Value {
    let mut value = serde_json::to_value(test).expect("test serialization");
    if let Some(map) = value.as_object_mut() {
        map.insert("bandwidth".into(), est.bandwidth.h().into());
        map.insert("kernel".into(), est.kernel.as_str().into());
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{Bandwidth, KernelId, TaperKernel};
    use crate::model::{fit_ols, DesignMatrix};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn estimate(matrix: DMatrix<f64>, n: usize) -> CovarianceEstimate {
        CovarianceEstimate {
            matrix,
            bandwidth: Bandwidth::new(5.0, &TaperKernel::PAPER, n).unwrap(),
            kernel: KernelId::Paper,
            psd: true,
            min_eigenvalue: 1.0,
            n,
        }
    }

    /// Fit with a chosen `β̂` and scaling: a design with orthogonal columns of
    /// norm `d_j` and response `X β`.
    fn fit_with(beta: &[f64], d: &[f64]) -> RegressionFit {
        let p = beta.len();
        let n = p + 2;
        let mut cols = vec![vec![0.0; n]; p];
        for j in 0..p {
            cols[j][j] = d[j];
        }
        let x = DesignMatrix::from_columns(&cols).unwrap();
        let y: Vec<f64> = (0..n)
            .map(|i| (0..p).map(|j| cols[j][i] * beta[j]).sum())
            .collect();
        fit_ols(&x, &y.into()).unwrap()
    }

    #[test]
    fn t_test_examples() {
        let fit = fit_with(&[0.0], &[10.0]);
        let t = t_test(&fit, &estimate(DMatrix::from_element(1, 1, 25.0), 3), 0).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
        assert!(!t.reject_at_5pct);

        let fit = fit_with(&[0.5], &[10.0]);
        let t = t_test(&fit, &estimate(DMatrix::from_element(1, 1, 25.0), 3), 0).unwrap();
        assert_relative_eq!(t.statistic, 1.0, epsilon = 1e-13);
        // 2(1 − Φ(1))
        assert!((t.p_value - 0.317_310_507_862_914).abs() < 1e-9);
    }

    #[test]
    fn t_test_rejects_nonpositive_variance() {
        let fit = fit_with(&[0.5], &[10.0]);
        let err = t_test(&fit, &estimate(DMatrix::from_element(1, 1, 0.0), 3), 0).unwrap_err();
        assert!(matches!(err, Error::NonPositiveVariance { index: 0, .. }));
        assert!(err.to_string().contains("bartlett"));
        assert!(matches!(
            t_test(&fit, &estimate(DMatrix::from_element(1, 1, 1.0), 3), 1),
            Err(Error::IndexOutOfRange { index: 1, p: 1 })
        ));
    }

    #[test]
    fn joint_test_examples() {
        let fit = fit_with(&[3.0, 4.0], &[1.0, 1.0]);
        let j = joint_test(&fit, &estimate(DMatrix::identity(2, 2), 4), &[0, 1]).unwrap();
        assert_relative_eq!(j.statistic, 25.0, epsilon = 1e-12);
        assert_eq!(j.dof, 2);
        assert_relative_eq!(j.p_value, (-12.5f64).exp(), max_relative = 1e-9);

        let fit = fit_with(&[0.0, 0.0, 2.0], &[1.0, 2.0, 3.0]);
        let j = joint_test(&fit, &estimate(DMatrix::identity(3, 3), 5), &[0, 1]).unwrap();
        assert_eq!(j.statistic, 0.0);
        assert_eq!(j.p_value, 1.0);

        assert_eq!(
            joint_test(&fit, &estimate(DMatrix::identity(3, 3), 5), &[]).unwrap_err(),
            Error::EmptyIndexSet
        );
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            joint_test(
                &fit_with(&[1.0, 1.0], &[1.0, 1.0]),
                &estimate(indefinite, 4),
                &[0, 1]
            ),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn distribution_function_examples() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.96) - 0.975_002_104_851_779_5).abs() < 1e-9);
        assert!(normal_cdf(-8.0) < 1e-14);
        assert_eq!(chi_square_sf(0.0, 3), 1.0);
        assert!((chi_square_sf(3.841, 1) - 0.0500).abs() < 5e-5);
        assert_relative_eq!(
            chi_square_sf(2.0 * 20f64.ln(), 2),
            0.05,
            max_relative = 1e-12
        );
        assert!((chi_square_sf(5.991, 2) - 0.05).abs() < 1e-4);
        for x in [0.1, 1.0, 7.5, 40.0] {
            assert_relative_eq!(chi_square_sf(x, 2), (-x / 2.0).exp(), max_relative = 1e-12);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for p in [1e-12, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.975, 1.0 - 1e-9] {
            let err = (normal_cdf(normal_quantile(p)) - p).abs();
            assert!(err <= 1e-9 * p.min(1.0 - p).max(1e-3), "p={p} err={err:e}");
        }
        assert_relative_eq!(
            normal_quantile(0.975),
            1.959_963_984_540_054,
            epsilon = 1e-12
        );
    }

    proptest! {
        #[test]
        fn whitening_matches_quadratic_form(
            entries in prop::collection::vec(-2.0f64..2.0, 9),
            v in prop::collection::vec(-10.0f64..10.0, 3),
        ) {
            let a = DMatrix::from_row_slice(3, 3, &entries);
            let spd = &a * a.transpose() + DMatrix::identity(3, 3) * 0.05;
            let v = DVector::from_vec(v);
            let z = whiten(&spd, &v).unwrap();
            let quad = v.dot(&(spd.clone().cholesky().unwrap().solve(&v)));
            prop_assert!((z.norm_squared() - quad).abs() <= 1e-8 * quad.max(1e-12));
        }

        #[test]
        fn normal_cdf_symmetry(x in -30.0f64..30.0) {
            prop_assert!((normal_cdf(-x) - (1.0 - normal_cdf(x))).abs() < 1e-15);
        }
    }
}
