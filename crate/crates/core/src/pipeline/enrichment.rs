//! Sector over-representation of clusters.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dbht::Clustering;
use crate::error::{Error, Result};
use crate::stats::hypergeometric_enrichment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentResult {
    pub cluster: usize,
    pub size: usize,
    pub dominant_sector: String,
    /// Members of the cluster in the dominant sector.
    pub overlap: usize,
    /// Stocks in the dominant sector across the whole population.
    pub sector_size: usize,
    pub p: f64,
    pub significant: bool,
}

/// `0.5 * n_clusters * n_sectors`.
pub fn bonferroni_divisor(n_clusters: usize, n_sectors: usize) -> f64 {
    0.5 * n_clusters as f64 * n_sectors as f64
}

/// Per cluster: the modal sector and the hypergeometric p-value of seeing at
/// least that many of its stocks. Ties for the modal sector go to the
/// sector with the smaller p-value, then the alphabetically first.
pub fn sector_enrichment(
    clustering: &Clustering,
    sectors: &[String],
    alpha: f64,
    divisor: f64,
) -> Result<Vec<EnrichmentResult>> {
    if sectors.len() != clustering.labels.len() {
        return Err(Error::validation("one sector label per stock is required"));
    }
    if !(alpha > 0.0 && alpha < 1.0) || !(divisor >= 1.0) {
        return Err(Error::validation("alpha must be in (0, 1) and the divisor at least 1"));
    }
    clustering.validate()?;
    let population = sectors.len() as u64;
    let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
    for s in sectors {
        *totals.entry(s).or_default() += 1;
    }
    let threshold = alpha / divisor;
    (1..=clustering.k)
        .map(|k| {
            let members = clustering.members(k);
            let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
            for &m in &members {
                *counts.entry(&sectors[m]).or_default() += 1;
            }
            let top = *counts.values().max().expect("clusters are non-empty");
            let mut best: Option<(f64, &str)> = None;
            for (&sector, &c) in counts.iter().filter(|(_, &c)| c == top) {
                let p = hypergeometric_enrichment(population, totals[sector], members.len() as u64, c)?;
                if best.is_none_or(|(bp, _)| p < bp) {
                    best = Some((p, sector));
                }
            }
            let (p, sector) = best.expect("at least one modal sector");
            Ok(EnrichmentResult {
                cluster: k,
                size: members.len(),
                dominant_sector: sector.to_string(),
                overlap: top as usize,
                sector_size: totals[sector] as usize,
                p,
                significant: p < threshold,
            })
        })
        .collect()
}

#[derive(Debug, Deserialize)]
struct SectorRow {
    ticker: String,
    sector: String,
}

/// `ticker,sector` rows into a lookup table.
pub fn read_sectors<R: Read>(reader: R) -> Result<BTreeMap<String, String>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = BTreeMap::new();
    for row in rdr.deserialize() {
        let row: SectorRow = row?;
        out.insert(row.ticker, row.sector);
    }
    Ok(out)
}

pub fn load_sectors(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    read_sectors(std::fs::File::open(path)?)
}

/// Labels in ticker order; every ticker must be present.
pub fn sector_labels(tickers: &[String], table: &BTreeMap<String, String>) -> Result<Vec<String>> {
    tickers
        .iter()
        .map(|t| table.get(t).cloned().ok_or_else(|| Error::validation(format!("no sector for stock {t}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fully_enriched_cluster() {
        let labels: Vec<usize> = (0..100).map(|i| if i < 10 { 1 } else { 2 + i % 3 }).collect();
        let sectors: Vec<String> =
            (0..100).map(|i| if i < 10 { "Rare".to_string() } else { format!("S{}", i % 7) }).collect();
        let c = Clustering::from_labels(&labels);
        let res = sector_enrichment(&c, &sectors, 0.05, bonferroni_divisor(c.k, 8)).unwrap();
        assert_eq!(res[0].dominant_sector, "Rare");
        assert!(res[0].p < 1e-6 && res[0].significant);
    }

    #[test]
    fn parse_table() {
        let t = read_sectors("ticker,sector\nA,Tech\nB,Banks\n".as_bytes()).unwrap();
        assert_eq!(t["B"], "Banks");
        assert!(sector_labels(&["A".into(), "C".into()], &t).is_err());
    }

    #[test]
    fn divisor() {
        assert_eq!(bonferroni_divisor(29, 19), 275.5);
    }
}
