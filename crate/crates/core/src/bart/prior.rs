//! Tree prior and hyperparameter calibration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::stats::{chi2_quantile, mean, variance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Continuous,
    Probit,
}

/// Prior probability that a node at `depth` is split: `α(1+d)^(−β)`.
pub fn split_prob(depth: usize, alpha: f64, beta: f64) -> f64 {
    alpha * (1.0 + depth as f64).powf(-beta)
}

/// Leaf prior sd. Continuous responses are rescaled to [−0.5, 0.5].
pub fn calibrate_leaf_sd(mode: Mode, k: f64, n_trees: usize) -> f64 {
    let half_range = match mode {
        Mode::Continuous => 0.5,
        Mode::Probit => 3.0,
    };
    half_range / (k * (n_trees as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaCalibration {
    pub lambda: f64,
    /// Residual variance the prior is calibrated against.
    pub s2: f64,
    /// True when the pilot regression was unusable and `var(y)` was used.
    pub fallback: bool,
}

/// Chooses λ so that `P(σ² < s²) = q` under the scaled-inverse-χ²(ν, λ)
/// prior, with `s²` the residual variance of a least-squares pilot fit.
pub fn calibrate_lambda(y: &[f64], x: &Matrix, nu: f64, q: f64) -> LambdaCalibration {
    let (s2, fallback) = match pilot_residual_variance(y, x) {
        Some(s2) => (s2, false),
        None => (variance(y).max(0.0), true),
    };
    LambdaCalibration {
        lambda: lambda_for(s2, nu, q),
        s2,
        fallback,
    }
}

pub fn lambda_for(s2: f64, nu: f64, q: f64) -> f64 {
    s2 * chi2_quantile(nu, 1.0 - q) / nu
}

/// OLS with an intercept. Missing values are imputed by the column mean and
/// constant columns are dropped; categorical codes enter as numbers.
fn pilot_residual_variance(y: &[f64], x: &Matrix) -> Option<f64> {
    let n = y.len();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for j in 0..x.n_cols() {
        let raw = x.column(j);
        let present: Vec<f64> = raw.iter().copied().filter(|v| !v.is_nan()).collect();
        if present.is_empty() {
            continue;
        }
        let m = mean(&present);
        let col: Vec<f64> = raw.iter().map(|&v| if v.is_nan() { m } else { v }).collect();
        if col.iter().all(|&v| v == col[0]) {
            continue;
        }
        cols.push(col);
    }
    let p = cols.len() + 1;
    if n <= p {
        return None;
    }
    let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] });
    let target = DVector::from_column_slice(y);
    let xtx = design.tr_mul(&design);
    let xty = design.tr_mul(&target);
    let beta = xtx.cholesky()?.solve(&xty);
    let resid = target - design * beta;
    let s2 = resid.norm_squared() / (n - p) as f64;
    s2.is_finite().then_some(s2)
}
