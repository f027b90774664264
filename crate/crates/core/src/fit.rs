//! Least-squares fits used by the exponent-recovery sweeps.

use crate::error::{LabError, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Ordinary least squares result; `coef[0]` is the intercept when one was requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    /// Coefficient of determination.
    pub r2: f64,
    pub rss: f64,
}

/// Fits `y ~ [1] + sum_i coef_i x_i` with the regressors given as columns.
pub fn ols(columns: &[Vec<f64>], y: &[f64], intercept: bool) -> Result<OlsFit> {
    let n = y.len();
    let p = columns.len() + usize::from(intercept);
    if n <= p {
        return Err(LabError::InsufficientPoints(format!(
            "{n} points for {p} coefficients"
        )));
    }
    if columns.iter().any(|c| c.len() != n) {
        return Err(LabError::Precondition("regressor length mismatch".into()));
    }
    if y.iter().chain(columns.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(LabError::Degenerate("non-finite regression data".into()));
    }
    let x = DMatrix::from_fn(n, p, |i, k| match (intercept, k) {
        (true, 0) => 1.0,
        (true, k) => columns[k - 1][i],
        (false, k) => columns[k][i],
    });
    let yv = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let beta = svd
        .solve(&yv, 1e-12)
        .map_err(|e| LabError::Degenerate(e.to_string()))?;
    let resid = &yv - &x * &beta;
    let rss = resid.norm_squared();
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    Ok(OlsFit {
        coef: beta.iter().copied().collect(),
        r2,
        rss,
    })
}

/// Best fit of `y ~ a + b ln r - c r^p` over a grid of exponents `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfileFit {
    pub p: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub r2: f64,
}

pub fn power_profile_fit(r: &[f64], y: &[f64], p_grid: &[f64]) -> Result<PowerProfileFit> {
    if r.iter().any(|&v| !(v > 0.0)) {
        return Err(LabError::Domain("radii must be positive".into()));
    }
    let lnr: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let mut best: Option<PowerProfileFit> = None;
    let mut best_rss = f64::INFINITY;
    for &p in p_grid {
        let rp: Vec<f64> = r.iter().map(|v| -v.powf(p)).collect();
        let fit = ols(&[lnr.clone(), rp], y, true)?;
        if fit.rss < best_rss {
            best_rss = fit.rss;
            best = Some(PowerProfileFit {
                p,
                a: fit.coef[0],
                b: fit.coef[1],
                c: fit.coef[2],
                r2: fit.r2,
            });
        }
    }
    best.ok_or_else(|| LabError::InsufficientPoints("empty exponent grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_line() {
        let x: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let f = ols(&[x], &y, true).unwrap();
        assert!((f.coef[0] - 3.0).abs() < 1e-12);
        assert!((f.coef[1] + 2.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_power_profile() {
        let r: Vec<f64> = (5..=40).step_by(5).map(|v| v as f64).collect();
        let y: Vec<f64> = r.iter().map(|v| 1.0 - 0.5 * v.ln() - 0.3 * v.powf(2.0)).collect();
        let grid: Vec<f64> = (0..=200).map(|i| 1.0 + 0.01 * i as f64).collect();
        let f = power_profile_fit(&r, &y, &grid).unwrap();
        assert!((f.p - 2.0).abs() < 1e-9);
        assert!((f.c - 0.3).abs() < 1e-9);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            ols(&[vec![1.0, 2.0]], &[1.0, 2.0], true),
            Err(LabError::InsufficientPoints(_))
        ));
    }
}
