//! Prices → standardized log-returns → standardized log-volatilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel_io::PricePanel;
use crate::stats::standardize;

/// Standardized log-returns, one row per stock.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    pub tickers: Vec<String>,
    pub returns: Vec<Vec<f64>>,
    /// Cells whose raw return was exactly zero (e.g. drag-filled gaps).
    /// Standardization moves them off zero, so they are tracked here.
    pub raw_zero: Vec<Vec<bool>>,
}

impl ReturnPanel {
    pub fn n_returns(&self) -> usize {
        self.returns.first().map_or(0, Vec::len)
    }
}

/// Standardized `ln|r|`, one row per stock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogVolPanel {
    pub tickers: Vec<String>,
    pub omega: Vec<Vec<f64>>,
    /// Number of zero returns clamped per stock before taking logs.
    pub floor_count: Vec<usize>,
}

impl LogVolPanel {
    pub fn n_stocks(&self) -> usize {
        self.omega.len()
    }

    pub fn n_times(&self) -> usize {
        self.omega.first().map_or(0, Vec::len)
    }

    /// Columns `range` of every row, each re-standardized.
    pub fn window(&self, start: usize, end: usize) -> Result<LogVolPanel> {
        if start >= end || end > self.n_times() {
            return Err(Error::validation(format!("window [{start}, {end}) outside 0..{}", self.n_times())));
        }
        let omega = self
            .omega
            .iter()
            .zip(&self.tickers)
            .map(|(row, t)| {
                standardize(&row[start..end]).map_err(|e| Error::validation(format!("stock {t}: {e}")))
            })
            .collect::<Result<_>>()?;
        Ok(LogVolPanel { tickers: self.tickers.clone(), omega, floor_count: self.floor_count.clone() })
    }
}

/// `ln p(t+1) - ln p(t)`.
pub fn raw_log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = prices.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(Error::validation(format!("non-positive price {p}")));
    }
    Ok(prices.windows(2).map(|w| w[1].ln() - w[0].ln()).collect())
}

pub fn log_returns(panel: &PricePanel) -> Result<ReturnPanel> {
    let mut returns = Vec::with_capacity(panel.n_stocks());
    let mut raw_zero = Vec::with_capacity(panel.n_stocks());
    for (ticker, row) in panel.tickers.iter().zip(&panel.prices) {
        let raw = raw_log_returns(row).map_err(|e| Error::validation(format!("stock {ticker}: {e}")))?;
        raw_zero.push(raw.iter().map(|r| *r == 0.0).collect());
        let z = standardize(&raw)
            .map_err(|_| Error::validation(format!("stock {ticker}: returns have zero variance")))?;
        returns.push(z);
    }
    Ok(ReturnPanel { tickers: panel.tickers.clone(), returns, raw_zero })
}

/// `ln|r|` with cells flagged in `zero` (and exact zeros) clamped to the
/// smallest remaining non-zero `|r|`. Returns the logs and the clamp count.
pub fn clamped_log_abs(row: &[f64], zero: &[bool]) -> Result<(Vec<f64>, usize)> {
    if row.len() != zero.len() {
        return Err(Error::validation("return row and zero mask differ in length"));
    }
    let clamp = |i: usize| zero[i] || row[i] == 0.0;
    let floor = (0..row.len())
        .filter(|&i| !clamp(i))
        .map(|i| row[i].abs())
        .fold(f64::INFINITY, f64::min);
    if !floor.is_finite() {
        return Err(Error::validation("every return in the row is zero"));
    }
    let mut count = 0;
    let logs = (0..row.len())
        .map(|i| {
            if clamp(i) {
                count += 1;
                floor.ln()
            } else {
                row[i].abs().ln()
            }
        })
        .collect();
    Ok((logs, count))
}

pub fn log_abs_transform(returns: &ReturnPanel) -> Result<LogVolPanel> {
    let mut omega = Vec::with_capacity(returns.returns.len());
    let mut floor_count = Vec::with_capacity(returns.returns.len());
    for ((ticker, row), zero) in returns.tickers.iter().zip(&returns.returns).zip(&returns.raw_zero) {
        let wrap = |e: Error| Error::validation(format!("stock {ticker}: {e}"));
        let (logs, count) = clamped_log_abs(row, zero).map_err(wrap)?;
        omega.push(standardize(&logs).map_err(wrap)?);
        floor_count.push(count);
    }
    Ok(LogVolPanel { tickers: returns.tickers.clone(), omega, floor_count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{is_standardized, mean, variance, STANDARDIZED_TOL};
    use chrono::NaiveDate;

    fn panel(rows: Vec<Vec<f64>>) -> PricePanel {
        let n = rows[0].len();
        let d0 = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let dates = (0..n).map(|i| d0 + chrono::Duration::days(i as i64)).collect();
        let tickers = (0..rows.len()).map(|i| format!("T{i}")).collect();
        PricePanel::new(tickers, dates, rows).unwrap()
    }

    #[test]
    fn definition() {
        let r = raw_log_returns(&[100.0, 110.0]).unwrap();
        assert!((r[0] - 1.1f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn constant_price_names_ticker() {
        let p = panel(vec![vec![1.0, 2.0, 1.5, 3.0], vec![5.0; 4]]);
        let err = log_returns(&p).unwrap_err().to_string();
        assert!(err.contains("T1"), "{err}");
    }

    #[test]
    fn two_line_oracle() {
        let p = panel(vec![vec![10.0, 11.0, 10.5, 12.0, 11.0], vec![3.0, 2.9, 3.1, 3.3, 3.2]]);
        let r = log_returns(&p).unwrap();
        for (row, prices) in r.returns.iter().zip(&p.prices) {
            let d: Vec<f64> = prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
            let (m, sd) = (mean(&d), variance(&d).sqrt());
            for (a, b) in row.iter().zip(&d) {
                assert!((a - (b - m) / sd).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_abs() {
        let e = std::f64::consts::E;
        let (logs, n) = clamped_log_abs(&[e, -e], &[false, false]).unwrap();
        assert_eq!(n, 0);
        assert!(logs.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn zeros_clamped() {
        let row = [0.5, 0.0, -0.2, 0.0, 0.0, 1.3];
        let (logs, n) = clamped_log_abs(&row, &[false; 6]).unwrap();
        assert_eq!(n, 3);
        assert!(logs.iter().all(|v| v.is_finite()));
        assert_eq!(logs[1], 0.2f64.ln());
        assert!(clamped_log_abs(&[0.0, 0.0], &[false, false]).is_err());
    }

    #[test]
    fn drag_filled_gaps_are_clamped() {
        let p = panel(vec![vec![10.0, 10.0, 11.0, 10.5, 10.5, 12.0], vec![3.0, 2.9, 3.1, 3.3, 3.2, 3.0]]);
        let r = log_returns(&p).unwrap();
        let lv = log_abs_transform(&r).unwrap();
        assert_eq!(lv.floor_count, vec![2, 0]);
        assert!(lv.omega.iter().all(|row| is_standardized(row, STANDARDIZED_TOL)));
    }
}
