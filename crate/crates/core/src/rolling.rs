//! Persistence of the static clusters and of their memory reduction across
//! rolling windows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dbht::{cluster_correlation, Clustering};
use crate::error::{Error, Result};
use crate::memory::{MemoryConfig, MIN_PROFILE_LENGTH};
use crate::pipeline::{
    market_stage, memory_filtration, regression_stage, EnetConfig, FiltrationReport, LogVolPanel, StageSeries,
};
use crate::stats::hypergeometric_enrichment;
use crate::weights::SchemeRegistry;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub n_windows: usize,
    pub length: usize,
    pub shift: usize,
    /// Half-open `[start, end)` ranges.
    pub ranges: Vec<(usize, usize)>,
}

/// `n` windows of length `w` over `t` days, spaced as widely as possible.
pub fn make_windows(t: usize, w: usize, n: usize) -> Result<WindowPlan> {
    if w == 0 || w > t || n < 2 || t - w < n - 1 {
        return Err(Error::validation(format!("cannot fit {n} windows of length {w} in {t} days")));
    }
    let shift = (t - w) / (n - 1);
    let ranges = (0..n).map(|m| (m * shift, m * shift + w)).collect();
    Ok(WindowPlan { n_windows: n, length: w, shift, ranges })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RollingConfig {
    pub window: usize,
    pub n_windows: usize,
    pub scheme: String,
    /// Family level for cluster matching, divided by the number of
    /// (static, window) cluster pairs in each window.
    pub alpha: f64,
    pub enet: EnetConfig,
    pub memory: MemoryConfig,
}

impl Default for RollingConfig {
    fn default() -> Self {
        RollingConfig {
            window: 1600,
            n_windows: 50,
            scheme: "eigen".into(),
            alpha: 0.05,
            enet: EnetConfig { n_perm: 0, ..EnetConfig::default() },
            memory: MemoryConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersistenceRecord {
    pub cluster: usize,
    pub windows_matched: usize,
    pub windows_memory_significant: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowOutcome {
    pub start: usize,
    pub end: usize,
    pub n_clusters: usize,
    /// Per static cluster: the matching window cluster and its p-value.
    pub matches: Vec<Option<(usize, f64)>>,
    pub memory_significant: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingResult {
    pub plan: WindowPlan,
    pub windows: Vec<WindowOutcome>,
    pub records: Vec<PersistenceRecord>,
}

/// Best-overlapping cluster of `window` for each cluster of `fixed`, kept
/// only when the hypergeometric p-value clears `alpha / (K_fixed * K_window)`.
pub fn match_clusters(fixed: &Clustering, window: &Clustering, alpha: f64) -> Result<Vec<Option<(usize, f64)>>> {
    let n = fixed.labels.len();
    if window.labels.len() != n {
        return Err(Error::validation("clusterings cover different numbers of stocks"));
    }
    let threshold = alpha / (fixed.k * window.k) as f64;
    let wsizes = window.sizes();
    (1..=fixed.k)
        .map(|k| {
            let members = fixed.members(k);
            let mut overlap = vec![0u64; window.k];
            for &m in &members {
                overlap[window.labels[m] - 1] += 1;
            }
            let mut best: Option<(usize, f64)> = None;
            for (j, &x) in overlap.iter().enumerate().filter(|(_, &x)| x > 0) {
                let p = hypergeometric_enrichment(n as u64, members.len() as u64, wsizes[j] as u64, x)?;
                if best.is_none_or(|(_, bp)| p < bp) {
                    best = Some((j + 1, p));
                }
            }
            Ok(best.filter(|(_, p)| *p < threshold))
        })
        .collect()
}

fn window_filtration(
    w: &LogVolPanel,
    residuals: &[Vec<f64>],
    g: &crate::stats::CorrelationMatrix,
    clustering: &Clustering,
    config: &RollingConfig,
    registry: &SchemeRegistry,
) -> Result<FiltrationReport> {
    let (_, stocks) = regression_stage(&w.tickers, residuals, g, clustering, &config.scheme, registry, &config.enet)?;
    let series: Vec<StageSeries> = (0..stocks.len())
        .map(|i| StageSeries {
            plain: &w.omega[i],
            market_removed: &residuals[i],
            cluster_removed: &stocks[i].cluster_removed,
            residual: &stocks[i].residual,
        })
        .collect();
    memory_filtration(&w.tickers, clustering, &series, &config.memory)
}

fn run_window(
    omega: &LogVolPanel,
    (start, end): (usize, usize),
    fixed: &Clustering,
    config: &RollingConfig,
    registry: &SchemeRegistry,
) -> Result<WindowOutcome> {
    let w = omega.window(start, end)?;
    let ms = market_stage(&w, &config.scheme, registry)?;
    let y = cluster_correlation(&ms.g)?;
    let matches = match_clusters(fixed, &y, config.alpha)?;
    let report = window_filtration(&w, &ms.residuals, &ms.g, &y, config, registry)?;
    // Unmatched static clusters are judged on their own membership.
    let fallback = if matches.iter().any(Option::is_none) {
        Some(window_filtration(&w, &ms.residuals, &ms.g, fixed, config, registry)?)
    } else {
        None
    };
    let memory_significant = matches
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let (rep, id) = match m {
                Some((j, _)) => (&report, *j),
                None => (fallback.as_ref().expect("computed when a match is missing"), i + 1),
            };
            rep.cluster(id).is_some_and(|g| g.stages[1].significant)
        })
        .collect();
    Ok(WindowOutcome { start, end, n_clusters: y.k, matches, memory_significant })
}

pub fn rolling_pipeline(
    omega: &LogVolPanel,
    plan: &WindowPlan,
    fixed: &Clustering,
    config: &RollingConfig,
    registry: &SchemeRegistry,
) -> Result<RollingResult> {
    if plan.length < MIN_PROFILE_LENGTH {
        return Err(Error::validation(format!(
            "window length {} is below the memory-profile minimum of {MIN_PROFILE_LENGTH}",
            plan.length
        )));
    }
    if fixed.labels.len() != omega.n_stocks() {
        return Err(Error::validation("static clustering does not match the panel"));
    }
    if plan.ranges.last().is_some_and(|r| r.1 > omega.n_times()) {
        return Err(Error::validation("window plan extends past the end of the panel"));
    }
    fixed.validate()?;
    let windows: Vec<WindowOutcome> = plan
        .ranges
        .par_iter()
        .map(|&r| run_window(omega, r, fixed, config, registry))
        .collect::<Result<_>>()?;
    let records = (0..fixed.k)
        .map(|i| PersistenceRecord {
            cluster: i + 1,
            windows_matched: windows.iter().filter(|w| w.matches[i].is_some()).count(),
            windows_memory_significant: windows.iter().filter(|w| w.memory_significant[i]).count(),
        })
        .collect();
    Ok(RollingResult { plan: plan.clone(), windows, records })
}
