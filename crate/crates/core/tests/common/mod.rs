//! Independent oracles shared by the integration tests. Nothing here calls
//! into the lag-accumulation path or the special-function backends.

#![allow(dead_code)]

use deplm::{DesignMatrix, TaperKernel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// `D (XᵗX)^{-1} Xᵗ Γ̂* X (XᵗX)^{-1} D` with the `n × n` tapered Toeplitz
/// matrix built explicitly.
pub fn dense_covariance(
    x: &DMatrix<f64>,
    residuals: &[f64],
    kernel: &TaperKernel,
    h: f64,
) -> DMatrix<f64> {
    let n = x.nrows();
    let p = x.ncols();
    let mut gamma = vec![0.0; n];
    for (k, g) in gamma.iter_mut().enumerate() {
        let mut s = 0.0;
        for j in 0..n - k {
            s += residuals[j] * residuals[j + k];
        }
        *g = s / n as f64;
    }
    let tapered = DMatrix::from_fn(n, n, |i, j| {
        let k = i.abs_diff(j);
        kernel.evaluate(k as f64 / h) * gamma[k]
    });
    let d = DMatrix::from_fn(p, p, |i, j| if i == j { x.column(i).norm() } else { 0.0 });
    let gram_inv = (x.transpose() * x)
        .try_inverse()
        .expect("invertible Gram matrix");
    let psi = &d * gram_inv * x.transpose();
    &psi * tapered * psi.transpose()
}

pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Random well-conditioned design with a leading intercept column.
pub fn random_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DesignMatrix {
    let mut data = DMatrix::<f64>::zeros(n, p);
    for i in 0..n {
        data[(i, 0)] = 1.0;
        for j in 1..p {
            let noise: f64 = rng.sample(StandardNormal);
            data[(i, j)] = noise + j as f64 * (i as f64 / n as f64);
        }
    }
    DesignMatrix::new(data).unwrap()
}

/// AR(1)-correlated noise so that several lags carry signal.
pub fn correlated_noise(rng: &mut ChaCha8Rng, n: usize, phi: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut prev = 0.0;
    for _ in 0..n {
        let e: f64 = rng.sample(StandardNormal);
        prev = phi * prev + e;
        out.push(prev);
    }
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Composite Simpson rule with `2 * half_steps` panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, half_steps: usize) -> f64 {
    let m = 2 * half_steps;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `Φ(x)` by quadrature of the normal density.
pub fn normal_cdf_oracle(x: f64) -> f64 {
    let density = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if x >= 0.0 {
        0.5 + simpson(density, 0.0, x, 2000)
    } else {
        0.5 - simpson(density, x, 0.0, 2000)
    }
}

/// `Γ(k/2)` from `Γ(1/2) = √π`, `Γ(1) = 1` and the recurrence.
fn gamma_half_integer(k: u32) -> f64 {
    let (mut value, mut arg) = if k.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    while arg < k as f64 / 2.0 {
        value *= arg;
        arg += 1.0;
    }
    value
}

/// `P(χ²_k > x)` by quadrature after the substitution `t = u²`, which removes
/// the singularity at zero for `k = 1`.
pub fn chi_square_sf_oracle(x: f64, k: u32) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let norm = 1.0 / (2f64.powf(k as f64 / 2.0) * gamma_half_integer(k));
    let integrand = |u: f64| 2.0 * u.powi(k as i32 - 1) * (-0.5 * u * u).exp();
    1.0 - norm * simpson(integrand, 0.0, x.sqrt(), 4000)
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
