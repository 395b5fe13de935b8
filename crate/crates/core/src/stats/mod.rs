//! Shared statistical kernels.

mod correlation;
mod eigen;
mod hypergeom;
mod spearman;

pub use correlation::{cluster_submatrix, correlation, CorrelationMatrix};
pub use eigen::{leading_eigenvector, symmetric_eigen, EigenPairs};
pub use hypergeom::{hypergeometric_enrichment, ln_choose};
pub use spearman::{rank_average, spearman, Alternative, SpearmanResult};

use crate::error::{Error, Result};

/// Tolerance used when checking that a row has been standardized.
pub const STANDARDIZED_TOL: f64 = 1e-8;

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (divisor `n`).
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

/// Pearson correlation of two equal-length series.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    sxy / (sxx * syy).sqrt()
}

/// Shift and scale a series to mean 0 and population variance 1.
pub fn standardize(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::validation("cannot standardize fewer than 2 values"));
    }
    let m = mean(values);
    let sd = variance(values).sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::validation("zero or non-finite variance"));
    }
    Ok(values.iter().map(|v| (v - m) / sd).collect())
}

pub fn is_standardized(values: &[f64], tol: f64) -> bool {
    values.len() >= 2 && mean(values).abs() <= tol && (variance(values) - 1.0).abs() <= tol
}

/// Median (midpoint convention) and median absolute deviation.
pub fn median_mad(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::validation("median of an empty set"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::validation("median of a set containing NaN"));
    }
    let med = median_of(&mut values.to_vec());
    let mut dev: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    Ok((med, median_of(&mut dev)))
}

pub fn median(values: &[f64]) -> Result<f64> {
    median_mad(values).map(|(m, _)| m)
}

/// In-place selection median; the buffer order is not preserved.
pub(crate) fn median_of(buf: &mut [f64]) -> f64 {
    let n = buf.len();
    let mid = n / 2;
    let (_, upper, _) = buf.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = buf[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lower + upper) / 2.0
    }
}
