//! Norm estimation, the matrix Khintchine bound and its empirical check.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::seed;

mod certify;
mod endgame;

pub use certify::{certify, Certificate, CertifyConfig, ChainItem};
pub use endgame::{extract_2ldc, verify_codewords, CodewordCheck, Extraction, LdcPair};

/// Real linear map given by matrix-vector products.
pub trait LinearOp {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y = A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// `y = Aᵀ x`.
    fn apply_t(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOp for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..self.ncols()).map(|j| self[(i, j)] * x[j]).sum();
        }
    }

    fn apply_t(&self, x: &[f64], y: &mut [f64]) {
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = (0..self.nrows()).map(|i| self[(i, j)] * x[i]).sum();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormEstimate {
    pub sigma_max: f64,
    /// `‖AᵀA v - σ² v‖ / σ²` at the returned vector.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct PowerConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig { tol: 1e-6, max_iter: 20_000, seed: 0 }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest singular value by power iteration on `AᵀA`.
///
/// Stops once the relative eigen-residual drops below `tol`, or once the
/// Rayleigh value has stalled to machine precision (clustered top spectrum,
/// where the value is accurate long before the vector settles).
pub fn spectral_norm(op: &dyn LinearOp, cfg: &PowerConfig) -> NormEstimate {
    let (m, n) = (op.nrows(), op.ncols());
    if m == 0 || n == 0 {
        return NormEstimate { sigma_max: 0.0, residual: 0.0, iterations: 0, converged: true };
    }
    let mut rng = seed::rng(cfg.seed, "power-iteration");
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut av = vec![0.0; m];
    let mut w = vec![0.0; n];
    let mut prev = f64::NAN;
    let mut stalled = 0;
    for it in 1..=cfg.max_iter {
        op.apply(&v, &mut av);
        op.apply_t(&av, &mut w);
        let lambda: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        if lambda <= 0.0 {
            return NormEstimate { sigma_max: 0.0, residual: 0.0, iterations: it, converged: true };
        }
        let residual = v.iter().zip(&w).map(|(a, b)| (b - lambda * a).powi(2)).sum::<f64>().sqrt() / lambda;
        let sigma = lambda.sqrt();
        if residual <= cfg.tol {
            return NormEstimate { sigma_max: sigma, residual, iterations: it, converged: true };
        }
        if (sigma - prev).abs() <= 1e-14 * sigma {
            stalled += 1;
            if stalled >= 20 {
                return NormEstimate { sigma_max: sigma, residual, iterations: it, converged: true };
            }
        } else {
            stalled = 0;
        }
        prev = sigma;
        let nw = norm(&w);
        v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / nw);
        if it == cfg.max_iter {
            return NormEstimate { sigma_max: sigma, residual, iterations: it, converged: false };
        }
    }
    unreachable!()
}

/// Dense oracle: largest singular value from a full SVD.
pub fn dense_sigma_max(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// `√(2σ² ln(d1 + d2))`, natural logarithm.
pub fn khintchine_bound(sigma2: f64, d1: usize, d2: usize) -> f64 {
    (2.0 * sigma2 * ((d1 + d2) as f64).ln()).sqrt()
}

/// Variance proxy `max(‖Σ X Xᵀ‖, ‖Σ XᵀX‖)`.
pub fn variance_proxy(xs: &[DMatrix<f64>]) -> f64 {
    let Some(first) = xs.first() else {
        return 0.0;
    };
    let (d1, d2) = first.shape();
    let mut left = DMatrix::<f64>::zeros(d1, d1);
    let mut right = DMatrix::<f64>::zeros(d2, d2);
    for x in xs {
        left += x * x.transpose();
        right += x.transpose() * x;
    }
    dense_sigma_max(&left).max(dense_sigma_max(&right))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RademacherReport {
    pub trials: usize,
    pub mean_norm: f64,
    pub max_norm: f64,
    pub sigma2: f64,
    pub bound: f64,
    pub log_base: &'static str,
    pub holds: bool,
}

/// Mean of `‖Σ b_i X_i‖₂` over seeded sign draws, against the Khintchine bound.
pub fn empirical_rademacher(xs: &[DMatrix<f64>], trials: usize, seed_value: u64) -> RademacherReport {
    let sigma2 = variance_proxy(xs);
    let (d1, d2) = xs.first().map_or((0, 0), |x| x.shape());
    let bound = if xs.is_empty() { 0.0 } else { khintchine_bound(sigma2, d1, d2) };
    let mut rng = seed::rng(seed_value, "rademacher");
    let mut total = 0.0;
    let mut max_norm: f64 = 0.0;
    for _ in 0..trials {
        let mut sum = DMatrix::<f64>::zeros(d1, d2);
        for x in xs {
            if rng.gen::<bool>() {
                sum += x;
            } else {
                sum -= x;
            }
        }
        let s = dense_sigma_max(&sum);
        total += s;
        max_norm = max_norm.max(s);
    }
    let mean_norm = if trials == 0 { 0.0 } else { total / trials as f64 };
    RademacherReport { trials, mean_norm, max_norm, sigma2, bound, log_base: "e", holds: mean_norm <= bound + 1e-12 }
}
