//! Four-stage memory filtration: how much of each stock's integrated memory
//! survives removal of the market mode, the cluster mode and the
//! interactions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dbht::Clustering;
use crate::error::{Error, Result};
use crate::memory::{memory_profile_with, MemoryConfig};
use crate::stats::median_mad;

pub const STAGES: [&str; 4] = ["plain", "market_removed", "cluster_removed", "residual"];
pub const RATIOS: [&str; 3] = ["market", "cluster", "interactions"];

/// The four series of one stock, plain log-volatility first.
#[derive(Debug, Clone, Copy)]
pub struct StageSeries<'a> {
    pub plain: &'a [f64],
    pub market_removed: &'a [f64],
    pub cluster_removed: &'a [f64],
    pub residual: &'a [f64],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockFiltration {
    pub ticker: String,
    pub cluster: usize,
    /// eta at each stage (plain, market removed, cluster removed, residual).
    pub eta: [f64; 4],
    pub l_cut: [usize; 4],
    /// eta_MM/eta_PL, eta_CM/eta_MM, eta_IM/eta_CM; `None` when the
    /// denominator is not positive.
    pub ratios: [Option<f64>; 3],
    /// (market, cluster, interactions, residual); `None` when eta_PL <= 0.
    pub fractions: Option<[f64; 4]>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageStat {
    pub median: Option<f64>,
    pub mad: Option<f64>,
    pub n_defined: usize,
    pub significant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Market,
    Cluster(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFiltration {
    pub group: Group,
    pub size: usize,
    pub stages: [StageStat; 3],
    /// Medians of the per-stock fractions, renormalized to sum to 1.
    pub fractions: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiltrationReport {
    pub stocks: Vec<StockFiltration>,
    pub market: GroupFiltration,
    pub clusters: Vec<GroupFiltration>,
}

impl FiltrationReport {
    pub fn cluster(&self, k: usize) -> Option<&GroupFiltration> {
        self.clusters.iter().find(|g| g.group == Group::Cluster(k))
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if den > 0.0 {
        Some(if num > 0.0 { num / den } else { 0.0 })
    } else {
        None
    }
}

/// Per-stock contribution shares; negative shares (a removal that raised
/// eta) are clamped to 0 and the rest renormalized.
pub fn contribution_fractions(eta: [f64; 4]) -> Option<[f64; 4]> {
    let pl = eta[0];
    if !(pl > 0.0) {
        return None;
    }
    let raw = [(eta[0] - eta[1]) / pl, (eta[1] - eta[2]) / pl, (eta[2] - eta[3]) / pl, eta[3] / pl];
    let clamped = raw.map(|v| v.max(0.0));
    let total: f64 = clamped.iter().sum();
    Some(clamped.map(|v| v / total))
}

fn profile_stock(ticker: &str, cluster: usize, s: &StageSeries, config: &MemoryConfig) -> Result<StockFiltration> {
    let mut eta = [0.0; 4];
    let mut l_cut = [0; 4];
    for (i, series) in [s.plain, s.market_removed, s.cluster_removed, s.residual].into_iter().enumerate() {
        let p = memory_profile_with(series, config)
            .map_err(|e| Error::validation(format!("stock {ticker}, stage {}: {e}", STAGES[i])))?;
        eta[i] = p.eta;
        l_cut[i] = p.l_cut;
    }
    let mut diagnostics = Vec::new();
    let ratios = [0, 1, 2].map(|i| {
        let r = ratio(eta[i + 1], eta[i]);
        if r.is_none() {
            diagnostics.push(format!("{} ratio undefined: eta at stage {} is {:.4}", RATIOS[i], STAGES[i], eta[i]));
        }
        r
    });
    let fractions = contribution_fractions(eta);
    if fractions.is_none() {
        diagnostics.push(format!("no contribution fractions: plain eta is {:.4}", eta[0]));
    }
    Ok(StockFiltration { ticker: ticker.to_string(), cluster, eta, l_cut, ratios, fractions, diagnostics })
}

/// Ratios needed before a group's stage can be called significant.
fn required_ratios(size: usize) -> usize {
    size.div_ceil(2).max(size.min(3))
}

fn stage_stat(values: &[f64], size: usize) -> Result<StageStat> {
    if values.is_empty() {
        return Ok(StageStat { median: None, mad: None, n_defined: 0, significant: false });
    }
    let (m, mad) = median_mad(values)?;
    let significant = values.len() >= required_ratios(size) && m + mad < 1.0;
    Ok(StageStat { median: Some(m), mad: Some(mad), n_defined: values.len(), significant })
}

fn summarize(group: Group, stocks: &[&StockFiltration]) -> Result<GroupFiltration> {
    let size = stocks.len();
    let mut stages = [StageStat { median: None, mad: None, n_defined: 0, significant: false }; 3];
    for (i, stage) in stages.iter_mut().enumerate() {
        let vals: Vec<f64> = stocks.iter().filter_map(|s| s.ratios[i]).collect();
        *stage = stage_stat(&vals, size)?;
    }
    let valid: Vec<[f64; 4]> = stocks.iter().filter_map(|s| s.fractions).collect();
    let mut fractions = [0.0, 0.0, 0.0, 1.0];
    if !valid.is_empty() {
        let mut med = [0.0; 4];
        for (c, m) in med.iter_mut().enumerate() {
            *m = median_mad(&valid.iter().map(|f| f[c]).collect::<Vec<_>>())?.0;
        }
        let total: f64 = med.iter().sum();
        if total > 0.0 {
            fractions = med.map(|v| v / total);
        }
    }
    Ok(GroupFiltration { group, size, stages, fractions })
}

/// eta at every stage for every stock, with group summaries for the whole
/// market and for each cluster. A stage is significant for a group when the
/// median plus the MAD of its ratio is below one.
pub fn memory_filtration(
    tickers: &[String],
    clustering: &Clustering,
    series: &[StageSeries],
    config: &MemoryConfig,
) -> Result<FiltrationReport> {
    if tickers.len() != series.len() || clustering.labels.len() != series.len() {
        return Err(Error::validation("filtration inputs disagree on the number of stocks"));
    }
    clustering.validate()?;
    let stocks: Vec<StockFiltration> = series
        .par_iter()
        .enumerate()
        .map(|(i, s)| profile_stock(&tickers[i], clustering.labels[i], s, config))
        .collect::<Result<_>>()?;
    let all: Vec<&StockFiltration> = stocks.iter().collect();
    let market = summarize(Group::Market, &all)?;
    let clusters = (1..=clustering.k)
        .map(|k| {
            let members: Vec<&StockFiltration> = stocks.iter().filter(|s| s.cluster == k).collect();
            summarize(Group::Cluster(k), &members)
        })
        .collect::<Result<_>>()?;
    Ok(FiltrationReport { stocks, market, clusters })
}

/// Clusters whose cluster-stage ratio is significant.
pub fn select_cluster_factors(report: &FiltrationReport) -> Vec<usize> {
    report
        .clusters
        .iter()
        .filter(|g| g.stages[1].significant)
        .filter_map(|g| match g.group {
            Group::Cluster(k) => Some(k),
            Group::Market => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn ar1(seed: u64, n: usize, phi: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = phi * x + e;
                x
            })
            .collect()
    }

    #[test]
    fn fractions_sum_to_one() {
        for eta in [[10.0, 4.0, 2.0, 1.0], [5.0, 6.0, 1.0, -0.5], [1.0, 1.0, 1.0, 1.0], [3.0, -1.0, 2.0, 0.5]] {
            let f = contribution_fractions(eta).unwrap();
            assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        assert_eq!(contribution_fractions([0.0, 1.0, 1.0, 1.0]), None);
    }

    #[test]
    fn ratio_conventions() {
        assert_eq!(ratio(2.0, 4.0), Some(0.5));
        assert_eq!(ratio(-1.0, 4.0), Some(0.0));
        assert_eq!(ratio(1.0, 0.0), None);
    }

    #[test]
    fn no_op_filtration() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| ar1(i, 1500, 0.8)).collect();
        let series: Vec<StageSeries> = rows
            .iter()
            .map(|r| StageSeries { plain: r, market_removed: r, cluster_removed: r, residual: r })
            .collect();
        let tickers: Vec<String> = (0..6).map(|i| format!("T{i}")).collect();
        let clustering = Clustering::from_labels(&[0, 0, 0, 1, 1, 1]);
        let rep = memory_filtration(&tickers, &clustering, &series, &MemoryConfig::default()).unwrap();
        for s in &rep.stocks {
            assert_eq!(s.ratios, [Some(1.0); 3]);
        }
        for g in std::iter::once(&rep.market).chain(&rep.clusters) {
            assert_eq!(g.fractions, [0.0, 0.0, 0.0, 1.0]);
            assert!(g.stages.iter().all(|st| !st.significant));
        }
        assert!(select_cluster_factors(&rep).is_empty());
    }

    #[test]
    fn required_ratio_counts() {
        assert_eq!(required_ratios(1), 1);
        assert_eq!(required_ratios(2), 2);
        assert_eq!(required_ratios(5), 3);
        assert_eq!(required_ratios(20), 10);
    }
}
