//! Scatter data relating the memory measures to each other and to the
//! average volatility correlation, with one-sided rank tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::MemoryProfile;
use crate::stats::{spearman, Alternative, CorrelationMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryScatterRow {
    pub ticker: String,
    /// Average correlation of the stock's log-volatility with every other stock.
    pub rho_vol: f64,
    pub eta: f64,
    pub beta_vol: Option<f64>,
    pub l_cut: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationTest {
    pub x: String,
    pub y: String,
    pub alternative: Alternative,
    pub n: usize,
    pub rho: f64,
    pub p: f64,
}

/// Mean off-diagonal entry of each row.
pub fn rho_vol(e: &CorrelationMatrix) -> Vec<f64> {
    let n = e.len();
    (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| e.values[(i, j)]).sum::<f64>() / (n - 1).max(1) as f64)
        .collect()
}

pub fn scatter_rows(tickers: &[String], e: &CorrelationMatrix, profiles: &[MemoryProfile]) -> Result<Vec<MemoryScatterRow>> {
    if tickers.len() != profiles.len() || e.len() != profiles.len() {
        return Err(Error::validation("scatter inputs disagree on the number of stocks"));
    }
    let rho = rho_vol(e);
    Ok(tickers
        .iter()
        .zip(profiles)
        .zip(rho)
        .map(|((t, p), r)| MemoryScatterRow {
            ticker: t.clone(),
            rho_vol: r,
            eta: p.eta,
            beta_vol: p.beta_vol,
            l_cut: p.l_cut,
        })
        .collect())
}

fn test_pair(
    name: (&str, &str),
    pairs: Vec<(f64, f64)>,
    alternative: Alternative,
) -> Result<RelationTest> {
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let r = spearman(&x, &y, alternative)?;
    Ok(RelationTest { x: name.0.into(), y: name.1.into(), alternative, n: x.len(), rho: r.rho, p: r.p })
}

/// eta vs beta_vol (negative), eta vs L_cut (positive), rho_vol vs eta
/// (positive) and rho_vol vs beta_vol (negative). Stocks without a fitted
/// exponent are left out of the tests that use it.
pub fn memory_relations(rows: &[MemoryScatterRow]) -> Result<Vec<RelationTest>> {
    let with_beta = |f: fn(&MemoryScatterRow) -> f64| -> Vec<(f64, f64)> {
        rows.iter().filter_map(|r| r.beta_vol.map(|b| (f(r), b))).collect()
    };
    Ok(vec![
        test_pair(("eta", "beta_vol"), with_beta(|r| r.eta), Alternative::Less)?,
        test_pair(("eta", "l_cut"), rows.iter().map(|r| (r.eta, r.l_cut as f64)).collect(), Alternative::Greater)?,
        test_pair(("rho_vol", "eta"), rows.iter().map(|r| (r.rho_vol, r.eta)).collect(), Alternative::Greater)?,
        test_pair(("rho_vol", "beta_vol"), with_beta(|r| r.rho_vol), Alternative::Less)?,
    ])
}
