//! Market and cluster modes and removal of the market mode.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::transform::LogVolPanel;
use crate::dbht::Clustering;
use crate::error::{Error, Result};
use crate::regression::{ols_fit, OlsFit};
use crate::stats::{cluster_submatrix, variance, CorrelationMatrix};
use crate::weights::{SchemeKind, WeightVector, WeightingScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Market,
    /// 1-based cluster id.
    Cluster(usize),
}

/// Weighted cross-sectional sum of a group of series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSeries {
    pub kind: ModeKind,
    pub values: Vec<f64>,
    pub weights: WeightVector,
    /// Row indices of the constituents, aligned with `weights`.
    pub members: Vec<usize>,
}

fn weighted_sum(rows: &[Vec<f64>], members: &[usize], weights: &[f64]) -> Vec<f64> {
    let t = rows[members[0]].len();
    let mut out = vec![0.0; t];
    for (&m, &w) in members.iter().zip(weights) {
        for (o, v) in out.iter_mut().zip(&rows[m]) {
            *o += w * v;
        }
    }
    out
}

impl ModeSeries {
    fn build(kind: ModeKind, rows: &[Vec<f64>], members: Vec<usize>, weights: WeightVector) -> Result<Self> {
        if members.is_empty() || members.len() != weights.len() {
            return Err(Error::validation("mode needs one weight per member"));
        }
        let values = weighted_sum(rows, &members, &weights.weights);
        Ok(ModeSeries { kind, values, weights, members })
    }

    /// The mode with `stock` left out of the sum, or `None` when it is the
    /// only member. Equal weights are renormalized over the remaining members.
    pub fn leave_one_out(&self, rows: &[Vec<f64>], stock: usize) -> Option<Vec<f64>> {
        let pos = self.members.iter().position(|&m| m == stock)?;
        if self.members.len() == 1 {
            return None;
        }
        let members: Vec<usize> = self.members.iter().copied().filter(|&m| m != stock).collect();
        let weights: Vec<f64> = match self.weights.scheme {
            SchemeKind::Equal => vec![1.0 / members.len() as f64; members.len()],
            SchemeKind::Eigen => {
                self.weights.weights.iter().enumerate().filter(|(i, _)| *i != pos).map(|(_, w)| *w).collect()
            }
        };
        Some(weighted_sum(rows, &members, &weights))
    }
}

/// `I_0(t) = sum_i xi_i omega_i(t)` with weights from `scheme` applied to
/// the correlation matrix of the log-volatilities.
pub fn market_mode(panel: &LogVolPanel, corr: &CorrelationMatrix, scheme: &dyn WeightingScheme) -> Result<ModeSeries> {
    if corr.len() != panel.n_stocks() {
        return Err(Error::validation("correlation matrix does not match the panel"));
    }
    let weights = scheme.weights(corr)?;
    ModeSeries::build(ModeKind::Market, &panel.omega, (0..panel.n_stocks()).collect(), weights)
}

/// Per-stock regression on the market mode.
#[derive(Debug, Clone)]
pub struct MarketRemoval {
    pub fits: Vec<OlsFit>,
    /// Residuals `c_i` rescaled to unit variance.
    pub standardized: Vec<Vec<f64>>,
    /// Standard deviation of each raw residual (`c_raw = scale * c_std`).
    pub scale: Vec<f64>,
}

pub fn remove_market(panel: &LogVolPanel, mode: &ModeSeries) -> Result<MarketRemoval> {
    if mode.values.len() != panel.n_times() {
        return Err(Error::validation("market mode length differs from the panel"));
    }
    let fits: Vec<OlsFit> = panel
        .omega
        .par_iter()
        .zip(&panel.tickers)
        .map(|(row, t)| ols_fit(row, &mode.values).map_err(|e| Error::validation(format!("stock {t}: {e}"))))
        .collect::<Result<_>>()?;
    let mut standardized = Vec::with_capacity(fits.len());
    let mut scale = Vec::with_capacity(fits.len());
    for fit in &fits {
        // OLS residuals have zero mean, so dividing by the SD standardizes them.
        let sd = variance(&fit.residuals).sqrt();
        scale.push(sd);
        standardized.push(if sd > 0.0 { fit.residuals.iter().map(|r| r / sd).collect() } else { fit.residuals.clone() });
    }
    Ok(MarketRemoval { fits, standardized, scale })
}

/// One mode per cluster of the residual panel, with eigen weights taken from
/// the cluster's block of `g`.
pub fn cluster_modes(
    residuals: &[Vec<f64>],
    g: &CorrelationMatrix,
    clustering: &Clustering,
    scheme: &dyn WeightingScheme,
) -> Result<Vec<ModeSeries>> {
    if clustering.labels.len() != residuals.len() || g.len() != residuals.len() {
        return Err(Error::validation("clustering does not cover every stock"));
    }
    clustering.validate()?;
    (1..=clustering.k)
        .map(|k| {
            let members = clustering.members(k);
            let sub = cluster_submatrix(g, &members)?;
            let weights = scheme.weights(&sub)?;
            ModeSeries::build(ModeKind::Cluster(k), residuals, members, weights)
        })
        .collect()
}
