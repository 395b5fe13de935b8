//! Cluster and interaction removal, and the end-to-end decomposition.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::modes::{cluster_modes, market_mode, remove_market, ModeKind, ModeSeries};
use super::transform::LogVolPanel;
use crate::dbht::{cluster_correlation, Clustering};
use crate::error::{Error, Result};
use crate::regression::{
    default_a_grid, default_lambda_grid, elastic_net_cv, ols_fit, predictor_significance, ElasticNetFit, OlsFit,
};
use crate::stats::{correlation, mean, variance, CorrelationMatrix};
use crate::weights::SchemeRegistry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnetConfig {
    pub a_grid: Vec<f64>,
    pub n_lambda: usize,
    /// Smallest lambda as a fraction of the largest.
    pub lambda_ratio: f64,
    pub folds: usize,
    /// Circular-shift permutations per selected predictor; 0 skips the test.
    pub n_perm: usize,
}

impl Default for EnetConfig {
    fn default() -> Self {
        EnetConfig { a_grid: default_a_grid(), n_lambda: 50, lambda_ratio: 1e-4, folds: 10, n_perm: 99 }
    }
}

/// Regression of one stock's market residual on the cluster modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockDecomposition {
    pub ticker: String,
    pub cluster: usize,
    /// Loading on the stock's own (leave-one-out) cluster mode; 0 for a singleton.
    pub own_beta: f64,
    /// `(cluster id, loading)` for every other cluster mode.
    pub interaction_betas: Vec<(usize, f64)>,
    pub fit: ElasticNetFit,
    /// Cluster id of each regression column, aligned with `fit.betas`.
    pub predictors: Vec<usize>,
    pub predictor_means: Vec<f64>,
    pub predictor_scales: Vec<f64>,
    /// OLS loading of the own-cluster stage (standardized own mode).
    pub own_stage_beta: f64,
    /// Market residual with the own-cluster mode removed on its own.
    #[serde(skip)]
    pub cluster_removed: Vec<f64>,
    /// Full residual `epsilon_i`, in the scale of the standardized market residual.
    #[serde(skip)]
    pub residual: Vec<f64>,
}

/// Elastic-net regression of the standardized market residual of `stock`
/// on every cluster mode. The stock's own cluster mode is rebuilt without
/// the stock itself.
pub fn remove_cluster_and_interactions(
    residuals: &[Vec<f64>],
    modes: &[ModeSeries],
    stock: usize,
    own_k: usize,
    ticker: &str,
    config: &EnetConfig,
) -> Result<StockDecomposition> {
    if own_k == 0 || own_k > modes.len() {
        return Err(Error::validation(format!("cluster {own_k} out of range for stock {ticker}")));
    }
    let y = &residuals[stock];
    let mut columns = Vec::new();
    let mut predictors = Vec::new();
    let mut means = Vec::new();
    let mut scales = Vec::new();
    for mode in modes {
        let ModeKind::Cluster(k) = mode.kind else {
            return Err(Error::validation("cluster regression given a market mode"));
        };
        let raw = if k == own_k {
            match mode.leave_one_out(residuals, stock) {
                Some(v) => v,
                None => continue,
            }
        } else {
            mode.values.clone()
        };
        let (mu, sd) = (mean(&raw), variance(&raw).sqrt());
        if !(sd > 0.0) {
            continue;
        }
        columns.push(raw.iter().map(|v| (v - mu) / sd).collect::<Vec<f64>>());
        predictors.push(k);
        means.push(mu);
        scales.push(sd);
    }

    let fit = if columns.is_empty() {
        ElasticNetFit {
            betas: Vec::new(),
            intercept: mean(y),
            a: 1.0,
            lambda: 0.0,
            cv_error: variance(y),
            p_values: Some(Vec::new()),
        }
    } else {
        let lambdas = default_lambda_grid(y, &columns, config.n_lambda, config.lambda_ratio)?;
        let mut fit = elastic_net_cv(y, &columns, &config.a_grid, &lambdas, config.folds)?;
        if config.n_perm > 0 {
            fit.p_values = Some(predictor_significance(&fit, y, &columns, config.n_perm)?);
        }
        fit
    };

    let t = y.len();
    let mut residual: Vec<f64> = y.iter().map(|v| v - fit.intercept).collect();
    let mut own_beta = 0.0;
    let mut interaction_betas = Vec::new();
    for ((col, &k), &b) in columns.iter().zip(&predictors).zip(&fit.betas) {
        for s in 0..t {
            residual[s] -= b * col[s];
        }
        if k == own_k {
            own_beta = b;
        } else {
            interaction_betas.push((k, b));
        }
    }
    // The cluster stage removes the own mode by itself. Taking the own term
    // out of the joint fit instead is unstable: after market removal the
    // modes are close to linearly dependent, and the joint fit can load
    // heavily on that near-null direction.
    let (own_stage_beta, cluster_removed) = match predictors.iter().position(|&k| k == own_k) {
        Some(j) => {
            let ols = ols_fit(y, &columns[j])?;
            (ols.beta, ols.residuals)
        }
        None => (0.0, y.clone()),
    };
    Ok(StockDecomposition {
        ticker: ticker.to_string(),
        cluster: own_k,
        own_beta,
        interaction_betas,
        fit,
        predictors,
        predictor_means: means,
        predictor_scales: scales,
        own_stage_beta,
        cluster_removed,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Name of a registered weighting scheme.
    pub scheme: String,
    pub enet: EnetConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { scheme: "eigen".into(), enet: EnetConfig::default() }
    }
}

/// Everything from the market mode to the per-stock residuals.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub tickers: Vec<String>,
    /// Correlation of the log-volatilities.
    pub e: CorrelationMatrix,
    pub market: ModeSeries,
    pub market_fits: Vec<OlsFit>,
    /// Standardized market residuals `c_i`.
    pub residuals: Vec<Vec<f64>>,
    pub residual_scale: Vec<f64>,
    /// Correlation of the market residuals.
    pub g: CorrelationMatrix,
    pub clustering: Clustering,
    pub modes: Vec<ModeSeries>,
    pub stocks: Vec<StockDecomposition>,
}

/// Market stage: mode, per-stock OLS and residual correlation.
pub struct MarketStage {
    pub e: CorrelationMatrix,
    pub market: ModeSeries,
    pub fits: Vec<OlsFit>,
    pub residuals: Vec<Vec<f64>>,
    pub scale: Vec<f64>,
    pub g: CorrelationMatrix,
}

pub fn market_stage(omega: &LogVolPanel, scheme: &str, registry: &SchemeRegistry) -> Result<MarketStage> {
    let scheme = registry.get(scheme)?;
    let e = correlation(&omega.tickers, &omega.omega)?;
    let market = market_mode(omega, &e, scheme.as_ref())?;
    let removal = remove_market(omega, &market)?;
    if let Some(i) = removal.scale.iter().position(|s| !(*s > 0.0)) {
        return Err(Error::validation(format!(
            "stock {} is fully explained by the market mode; its residual has zero variance",
            omega.tickers[i]
        )));
    }
    let g = correlation(&omega.tickers, &removal.standardized)?;
    Ok(MarketStage { e, market, fits: removal.fits, residuals: removal.standardized, scale: removal.scale, g })
}

/// Cluster modes and the per-stock elastic-net fits, in parallel over stocks.
pub fn regression_stage(
    tickers: &[String],
    residuals: &[Vec<f64>],
    g: &CorrelationMatrix,
    clustering: &Clustering,
    scheme: &str,
    registry: &SchemeRegistry,
    config: &EnetConfig,
) -> Result<(Vec<ModeSeries>, Vec<StockDecomposition>)> {
    let scheme = registry.get(scheme)?;
    let modes = cluster_modes(residuals, g, clustering, scheme.as_ref())?;
    let stocks = (0..residuals.len())
        .into_par_iter()
        .map(|i| remove_cluster_and_interactions(residuals, &modes, i, clustering.labels[i], &tickers[i], config))
        .collect::<Result<Vec<_>>>()?;
    Ok((modes, stocks))
}

pub fn decompose(omega: &LogVolPanel, config: &PipelineConfig, registry: &SchemeRegistry) -> Result<Decomposition> {
    let ms = market_stage(omega, &config.scheme, registry)?;
    let clustering = cluster_correlation(&ms.g)?;
    let (modes, stocks) =
        regression_stage(&omega.tickers, &ms.residuals, &ms.g, &clustering, &config.scheme, registry, &config.enet)?;
    Ok(Decomposition {
        tickers: omega.tickers.clone(),
        e: ms.e,
        market: ms.market,
        market_fits: ms.fits,
        residuals: ms.residuals,
        residual_scale: ms.scale,
        g: ms.g,
        clustering,
        modes,
        stocks,
    })
}

impl Decomposition {
    /// Rebuild `omega_i` from the market fit, the cluster and interaction
    /// loadings and the residual, undoing the intermediate rescalings.
    pub fn reconstruct(&self, stock: usize) -> Vec<f64> {
        let fit = &self.market_fits[stock];
        let dec = &self.stocks[stock];
        let sd = self.residual_scale[stock];
        let t = self.market.values.len();
        let mut out: Vec<f64> = (0..t).map(|s| fit.beta * self.market.values[s] + fit.alpha).collect();
        for s in 0..t {
            out[s] += sd * (dec.fit.intercept + dec.residual[s]);
        }
        for (j, &k) in dec.predictors.iter().enumerate() {
            let mode = &self.modes[k - 1];
            let raw = if k == dec.cluster {
                mode.leave_one_out(&self.residuals, stock).expect("own column exists only for non-singletons")
            } else {
                mode.values.clone()
            };
            let coef = sd * dec.fit.betas[j] / dec.predictor_scales[j];
            for s in 0..t {
                out[s] += coef * (raw[s] - dec.predictor_means[j]);
            }
        }
        out
    }
}
