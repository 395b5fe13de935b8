//! Price ingestion, calendar alignment and persistence.
//!
//! The single ingestion format is delimited text with the header
//! `ticker,date,close`, one row per observation and ISO-8601 dates. A cleaned
//! panel is written back in the same format together with a JSON sidecar
//! describing what the cleaning step did.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of the longest history a series must reach to survive cleaning.
pub const DEFAULT_CLEAN_P: f64 = 0.90;

/// Price history of one ticker as it appears in the source file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub ticker: String,
    pub dates: Vec<NaiveDate>,
    pub prices: Vec<f64>,
}

impl RawSeries {
    pub fn new(ticker: impl Into<String>, dates: Vec<NaiveDate>, prices: Vec<f64>) -> Result<Self> {
        let series = RawSeries { ticker: ticker.into(), dates, prices };
        series.validate()?;
        Ok(series)
    }

    fn validate(&self) -> Result<()> {
        if self.dates.is_empty() || self.dates.len() != self.prices.len() {
            return Err(Error::validation(format!(
                "series {} must have equal, non-zero numbers of dates and prices",
                self.ticker
            )));
        }
        if let Some(w) = self.dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::validation(format!(
                "series {}: dates not strictly increasing at {}",
                self.ticker, w[1]
            )));
        }
        if let Some(p) = self.prices.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::validation(format!(
                "series {}: non-positive price {p}",
                self.ticker
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Aligned ticker x date matrix of closing prices.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    pub tickers: Vec<String>,
    pub dates: Vec<NaiveDate>,
    /// One row per ticker, one column per date.
    pub prices: Vec<Vec<f64>>,
}

impl PricePanel {
    pub fn new(tickers: Vec<String>, dates: Vec<NaiveDate>, prices: Vec<Vec<f64>>) -> Result<Self> {
        if tickers.len() < 2 || dates.len() < 2 {
            return Err(Error::validation(format!(
                "a price panel needs at least 2 stocks and 2 dates (got {} x {})",
                tickers.len(),
                dates.len()
            )));
        }
        if prices.len() != tickers.len() {
            return Err(Error::validation("price rows do not match ticker count"));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("panel dates must be strictly increasing"));
        }
        for (ticker, row) in tickers.iter().zip(&prices) {
            if row.len() != dates.len() {
                return Err(Error::validation(format!("row {ticker} has the wrong length")));
            }
            if row.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
                return Err(Error::validation(format!("row {ticker} has a non-positive price")));
            }
        }
        Ok(PricePanel { tickers, dates, prices })
    }

    /// Build a panel from series that already share one date axis.
    pub fn from_aligned(series: Vec<RawSeries>) -> Result<Self> {
        let dates = series
            .first()
            .map(|s| s.dates.clone())
            .ok_or_else(|| Error::validation("no series"))?;
        if let Some(s) = series.iter().find(|s| s.dates != dates) {
            return Err(Error::validation(format!(
                "series {} is not aligned to the common date axis",
                s.ticker
            )));
        }
        let tickers = series.iter().map(|s| s.ticker.clone()).collect();
        let prices = series.into_iter().map(|s| s.prices).collect();
        PricePanel::new(tickers, dates, prices)
    }

    pub fn n_stocks(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn to_series(&self) -> Vec<RawSeries> {
        self.tickers
            .iter()
            .zip(&self.prices)
            .map(|(t, p)| RawSeries { ticker: t.clone(), dates: self.dates.clone(), prices: p.clone() })
            .collect()
    }
}

/// Metadata written next to a cleaned panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSidecar {
    pub n_stocks: usize,
    pub n_dates: usize,
    pub p: f64,
    pub dropped_tickers: Vec<String>,
}

/// Result of [`clean_panel`].
#[derive(Debug, Clone)]
pub struct CleanedPanel {
    pub panel: PricePanel,
    pub dropped_tickers: Vec<String>,
    pub p: f64,
}

impl CleanedPanel {
    pub fn sidecar(&self) -> PanelSidecar {
        PanelSidecar {
            n_stocks: self.panel.n_stocks(),
            n_dates: self.panel.n_dates(),
            p: self.p,
            dropped_tickers: self.dropped_tickers.clone(),
        }
    }
}

/// Read `ticker,date,close` rows into one series per ticker.
///
/// Tickers keep their order of first appearance; each series is sorted by
/// date. Duplicate `(ticker, date)` rows and non-positive prices are rejected.
pub fn read_prices<R: Read>(reader: R) -> Result<Vec<RawSeries>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["ticker", "date", "close"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| !h.eq_ignore_ascii_case(e)) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `ticker,date,close`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut index: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<(String, Vec<(NaiveDate, f64)>)> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 3 {
            return Err(Error::Parse { line, message: format!("expected 3 fields, found {}", record.len()) });
        }
        let ticker = record[0].to_string();
        if ticker.is_empty() {
            return Err(Error::Parse { line, message: "empty ticker".into() });
        }
        let date = NaiveDate::parse_from_str(&record[1], "%Y-%m-%d")
            .map_err(|e| Error::Parse { line, message: format!("bad date `{}`: {e}", &record[1]) })?;
        let close: f64 = record[2]
            .parse()
            .map_err(|e| Error::Parse { line, message: format!("bad close `{}`: {e}", &record[2]) })?;
        if !(close.is_finite() && close > 0.0) {
            return Err(Error::validation(format!(
                "line {line}: non-positive price {close} for {ticker} on {date}"
            )));
        }
        let slot = *index.entry(ticker.clone()).or_insert_with(|| {
            rows.push((ticker.clone(), Vec::new()));
            rows.len() - 1
        });
        rows[slot].1.push((date, close));
    }

    rows.into_iter()
        .map(|(ticker, mut obs)| {
            obs.sort_by_key(|(d, _)| *d);
            if let Some(w) = obs.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::validation(format!("duplicate date {} for ticker {ticker}", w[0].0)));
            }
            let (dates, prices) = obs.into_iter().unzip();
            RawSeries::new(ticker, dates, prices)
        })
        .collect()
}

pub fn load_prices(path: impl AsRef<Path>) -> Result<Vec<RawSeries>> {
    let file = std::fs::File::open(path.as_ref())?;
    read_prices(std::io::BufReader::new(file))
}

/// Write series in the ingestion format. Floats use the shortest
/// representation that round-trips exactly.
pub fn write_series<W: Write>(series: &[RawSeries], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["ticker", "date", "close"])?;
    for s in series {
        for (d, p) in s.dates.iter().zip(&s.prices) {
            wtr.write_record([s.ticker.as_str(), &d.format("%Y-%m-%d").to_string(), &p.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_panel<W: Write>(panel: &PricePanel, writer: W) -> Result<()> {
    write_series(&panel.to_series(), writer)
}

pub fn save_panel(panel: &PricePanel, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_panel(panel, std::io::BufWriter::new(file))
}

/// Load a file that is already aligned (e.g. the output of [`save_panel`]).
pub fn load_panel(path: impl AsRef<Path>) -> Result<PricePanel> {
    PricePanel::from_aligned(load_prices(path)?)
}

/// Align series to a common calendar.
///
/// 1. Series shorter than `p` times the longest series are dropped.
/// 2. The common start is the first date by which every survivor has begun
///    trading.
/// 3. The date axis is the union of the survivors' trading dates from that
///    start onward.
/// 4. Gaps are filled by dragging the last available price forward, which
///    yields a zero log-return on the filled day.
pub fn clean_panel(series: &[RawSeries], p: f64) -> Result<CleanedPanel> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::validation(format!("cleaning fraction p={p} must lie in (0, 1]")));
    }
    for s in series {
        s.validate()?;
    }
    let max_len = series.iter().map(RawSeries::len).max().unwrap_or(0);
    let threshold = p * max_len as f64;
    let (survivors, dropped): (Vec<&RawSeries>, Vec<&RawSeries>) =
        series.iter().partition(|s| s.len() as f64 >= threshold);
    if survivors.len() < 2 {
        return Err(Error::validation(format!(
            "only {} series survive the length filter (p={p}); at least 2 are required",
            survivors.len()
        )));
    }

    let start = survivors.iter().map(|s| s.dates[0]).max().expect("non-empty");
    let axis: Vec<NaiveDate> = survivors
        .iter()
        .flat_map(|s| s.dates.iter().copied().filter(|d| *d >= start))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut prices = Vec::with_capacity(survivors.len());
    for s in &survivors {
        // Last observation at or before the start seeds the drag.
        let mut pos = s.dates.partition_point(|d| *d <= start);
        if pos == 0 {
            return Err(Error::validation(format!(
                "series {} has no price on or before the common start {start}",
                s.ticker
            )));
        }
        let mut last = s.prices[pos - 1];
        let mut row = Vec::with_capacity(axis.len());
        for d in &axis {
            while pos < s.len() && s.dates[pos] <= *d {
                last = s.prices[pos];
                pos += 1;
            }
            row.push(last);
        }
        prices.push(row);
    }

    let panel = PricePanel::new(survivors.iter().map(|s| s.ticker.clone()).collect(), axis, prices)?;
    Ok(CleanedPanel { panel, dropped_tickers: dropped.iter().map(|s| s.ticker.clone()).collect(), p })
}
