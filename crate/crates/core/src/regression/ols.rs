use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Simple regression `y = beta * x + alpha + residual` with t-test p-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub beta: f64,
    pub alpha: f64,
    pub p_beta: f64,
    pub p_alpha: f64,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

fn two_sided_p(coef: f64, se: f64, dist: &StudentsT) -> f64 {
    if se == 0.0 || !se.is_finite() {
        return if coef == 0.0 { 1.0 } else { 0.0 };
    }
    (2.0 * dist.sf((coef / se).abs())).min(1.0)
}

pub fn ols_fit(y: &[f64], x: &[f64]) -> Result<OlsFit> {
    if y.len() != x.len() {
        return Err(Error::validation(format!("length mismatch: y has {}, x has {}", y.len(), x.len())));
    }
    let t = y.len();
    if t < 3 {
        return Err(Error::validation("ordinary least squares needs at least 3 observations"));
    }
    let tf = t as f64;
    let mx = x.iter().sum::<f64>() / tf;
    let my = y.iter().sum::<f64>() / tf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::validation("regressor is constant"));
    }
    let beta = sxy / sxx;
    let alpha = my - beta * mx;
    // Residuals from centered quantities so their mean is zero to rounding.
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| (b - my) - beta * (a - mx)).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let s2 = rss / (tf - 2.0);
    let se_beta = (s2 / sxx).sqrt();
    let se_alpha = (s2 * (1.0 / tf + mx * mx / sxx)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, tf - 2.0).expect("df > 0");
    Ok(OlsFit {
        beta,
        alpha,
        p_beta: two_sided_p(beta, se_beta, &dist),
        p_alpha: two_sided_p(alpha, se_alpha, &dist),
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let fit = ols_fit(&y, &x).unwrap();
        assert!((fit.beta - 2.0).abs() < 1e-12);
        assert!((fit.alpha - 1.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
        assert!(fit.p_beta < 1e-12);
    }

    #[test]
    fn constant_regressor_rejected() {
        assert!(ols_fit(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).is_err());
        assert!(ols_fit(&[1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn matches_normal_equations() {
        let x = [0.3, -1.2, 2.2, 0.7, -0.4, 1.9, -2.5, 0.1];
        let y = [1.0, -0.5, 3.1, 0.2, 0.4, 2.8, -1.7, 0.9];
        let fit = ols_fit(&y, &x).unwrap();
        // [n, sx; sx, sxx] [alpha; beta] = [sy; sxy]
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let det = n * sxx - sx * sx;
        let alpha = (sy * sxx - sx * sxy) / det;
        let beta = (n * sxy - sx * sy) / det;
        assert!((fit.alpha - alpha).abs() < 1e-10 && (fit.beta - beta).abs() < 1e-10);
        let mean_resid: f64 = fit.residuals.iter().sum::<f64>() / n;
        assert!(mean_resid.abs() < 1e-10);
    }
}
