//! Volatility-clustering memory: autocorrelation, Bartlett cut, power-law
//! decay exponent and the integrated memory proxy η.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::stats::{mean, median};

pub const MIN_PROFILE_LENGTH: usize = 100;
pub const MAX_LAG_CAP: usize = 1000;
pub const DEFAULT_LEVEL: f64 = 0.05;

/// Width of the Bartlett significance band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BartlettBand {
    /// `z * sqrt((1 + 2 sum_{j<L} k(j)^2) / T)`
    #[default]
    Cumulative,
    /// `z / sqrt(T)`
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryConfig {
    pub level: f64,
    pub band: BartlettBand,
    pub max_lag_cap: usize,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        MemoryConfig { level: DEFAULT_LEVEL, band: BartlettBand::Cumulative, max_lag_cap: MAX_LAG_CAP }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BartlettCut {
    pub l_cut: usize,
    /// No lag fell inside the band; `l_cut` is the last available lag.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryProfile {
    /// `acf[L - 1]` is the autocorrelation at lag `L`.
    pub acf: Vec<f64>,
    pub l_cut: usize,
    pub truncated: bool,
    /// `None` when fewer than two lags in `[1, l_cut]` have positive autocorrelation.
    pub beta_vol: Option<f64>,
    pub eta: f64,
    /// `eta_curve[L' - 1]` is the integral over `[1, L']`.
    pub eta_curve: Vec<f64>,
}

/// Sample autocorrelation at lags `1..=l_max`, normalized by `T - L` and the
/// population variance. The series is demeaned first.
pub fn acf(series: &[f64], l_max: usize) -> Result<Vec<f64>> {
    let t = series.len();
    if l_max == 0 || l_max >= t {
        return Err(Error::validation(format!("lag count {l_max} must be in [1, {})", t)));
    }
    let mu = mean(series);
    let s: Vec<f64> = series.iter().map(|v| v - mu).collect();
    let var = s.iter().map(|v| v * v).sum::<f64>() / t as f64;
    if !(var > 0.0) {
        return Err(Error::validation("autocorrelation of a constant series is undefined"));
    }
    Ok((1..=l_max)
        .map(|lag| {
            let cov = s[lag..].iter().zip(&s[..t - lag]).map(|(a, b)| a * b).sum::<f64>() / (t - lag) as f64;
            (cov / var).clamp(-1.0, 1.0)
        })
        .collect())
}

/// First lag whose autocorrelation falls below the Bartlett band at `level`.
pub fn bartlett_cut(kappa: &[f64], t: usize, level: f64, band: BartlettBand) -> Result<BartlettCut> {
    if kappa.is_empty() {
        return Err(Error::validation("empty autocorrelation"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::validation(format!("significance level {level} outside (0, 1)")));
    }
    if t == 0 {
        return Err(Error::validation("sample size must be positive"));
    }
    let z = Normal::standard().inverse_cdf(1.0 - level / 2.0);
    let mut cum = 0.0;
    for (i, &k) in kappa.iter().enumerate() {
        let spread = match band {
            BartlettBand::Cumulative => 1.0 + 2.0 * cum,
            BartlettBand::Flat => 1.0,
        };
        if k < z * (spread / t as f64).sqrt() {
            return Ok(BartlettCut { l_cut: i + 1, truncated: false });
        }
        cum += k * k;
    }
    Ok(BartlettCut { l_cut: kappa.len(), truncated: true })
}

/// Median of all pairwise slopes `(y_j - y_i) / (x_j - x_i)` over pairs with
/// distinct abscissae.
pub fn theil_sen_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::validation("Theil-Sen inputs differ in length"));
    }
    let mut slopes = Vec::with_capacity(x.len() * x.len().saturating_sub(1) / 2);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            if x[j] != x[i] {
                slopes.push((y[j] - y[i]) / (x[j] - x[i]));
            }
        }
    }
    if slopes.is_empty() {
        return Err(Error::validation("Theil-Sen needs two points with distinct abscissae"));
    }
    median(&slopes)
}

/// Power-law decay exponent: minus the Theil-Sen slope of `ln k(L)` on
/// `ln L` over the lags in `lags` (inclusive, 1-based) where `k(L) > 0`.
pub fn theil_sen_loglog(kappa: &[f64], lags: (usize, usize)) -> Result<f64> {
    let (lo, hi) = lags;
    if lo < 1 || hi < lo || hi > kappa.len() {
        return Err(Error::validation(format!("lag range [{lo}, {hi}] invalid for {} lags", kappa.len())));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = (lo..=hi)
        .filter(|&l| kappa[l - 1] > 0.0)
        .map(|l| ((l as f64).ln(), kappa[l - 1].ln()))
        .unzip();
    if x.len() < 2 {
        return Err(Error::validation("fewer than 2 lags with positive autocorrelation"));
    }
    Ok(-theil_sen_slope(&x, &y)?)
}

/// Trapezoidal integral of `k` over integer lags `1..=l_cut`, together with
/// every partial integral (the first is 0).
pub fn eta(kappa: &[f64], l_cut: usize) -> Result<(f64, Vec<f64>)> {
    if l_cut < 1 {
        return Err(Error::validation("l_cut must be at least 1"));
    }
    if l_cut > kappa.len() {
        return Err(Error::validation(format!("l_cut {l_cut} exceeds the {} available lags", kappa.len())));
    }
    let mut curve = Vec::with_capacity(l_cut);
    curve.push(0.0);
    for l in 1..l_cut {
        let prev = curve[l - 1];
        curve.push(prev + 0.5 * (kappa[l - 1] + kappa[l]));
    }
    Ok((curve[l_cut - 1], curve))
}

pub fn memory_profile(series: &[f64]) -> Result<MemoryProfile> {
    memory_profile_with(series, &MemoryConfig::default())
}

pub fn memory_profile_with(series: &[f64], config: &MemoryConfig) -> Result<MemoryProfile> {
    let t = series.len();
    if t < MIN_PROFILE_LENGTH {
        return Err(Error::validation(format!("memory profile needs at least {MIN_PROFILE_LENGTH} points, got {t}")));
    }
    let l_max = (t / 4).min(config.max_lag_cap).max(1);
    let kappa = acf(series, l_max)?;
    let cut = bartlett_cut(&kappa, t, config.level, config.band)?;
    let beta_vol = theil_sen_loglog(&kappa, (1, cut.l_cut)).ok();
    let (eta_value, eta_curve) = eta(&kappa, cut.l_cut)?;
    Ok(MemoryProfile { acf: kappa, l_cut: cut.l_cut, truncated: cut.truncated, beta_vol, eta: eta_value, eta_curve })
}
