use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{is_standardized, STANDARDIZED_TOL};
use crate::error::{Error, Result};

/// Labeled correlation matrix of standardized series.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub values: DMatrix<f64>,
}

impl CorrelationMatrix {
    /// Wrap a matrix, checking symmetry, unit diagonal and range.
    pub fn new(labels: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        let n = labels.len();
        if values.nrows() != n || values.ncols() != n {
            return Err(Error::validation("correlation matrix shape does not match labels"));
        }
        for i in 0..n {
            if (values[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::validation(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..i {
                let v = values[(i, j)];
                if (v - values[(j, i)]).abs() > 1e-12 || !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&v) {
                    return Err(Error::validation(format!("entry ({i},{j}) is not a valid correlation")));
                }
            }
        }
        Ok(CorrelationMatrix { labels, values })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Mean correlation of stock `i` with every other stock.
    pub fn avg_cross_correlation(&self, i: usize) -> Result<f64> {
        let n = self.len();
        if n < 2 {
            return Err(Error::validation("average cross correlation needs at least 2 stocks"));
        }
        if i >= n {
            return Err(Error::validation(format!("stock index {i} out of range for {n} stocks")));
        }
        let sum: f64 = (0..n).filter(|&j| j != i).map(|j| self.values[(i, j)]).sum();
        Ok(sum / (n - 1) as f64)
    }

    /// Labeled delimited text: a header row of labels, then one row per stock.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec![String::new()];
        header.extend(self.labels.iter().cloned());
        wtr.write_record(&header)?;
        for (i, label) in self.labels.iter().enumerate() {
            let mut row = vec![label.clone()];
            row.extend((0..self.len()).map(|j| self.values[(i, j)].to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `values[i][j] = (1/T) sum_t row_i(t) row_j(t)` over standardized rows.
pub fn correlation(labels: &[String], rows: &[Vec<f64>]) -> Result<CorrelationMatrix> {
    let n = rows.len();
    if labels.len() != n {
        return Err(Error::validation("label count does not match row count"));
    }
    let t = rows.first().map(Vec::len).unwrap_or(0);
    if t < 2 {
        return Err(Error::validation("correlation needs at least 2 observations"));
    }
    for (label, row) in labels.iter().zip(rows) {
        if row.len() != t {
            return Err(Error::validation(format!("row {label} has length {} (expected {t})", row.len())));
        }
        if !is_standardized(row, STANDARDIZED_TOL) {
            return Err(Error::validation(format!("row {label} is not standardized")));
        }
    }
    let tf = t as f64;
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| {
                    let s: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                    (s / tf).clamp(-1.0, 1.0)
                })
                .collect()
        })
        .collect();
    let mut values = DMatrix::identity(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, v) in row.iter().enumerate() {
            let j = i + 1 + off;
            values[(i, j)] = *v;
            values[(j, i)] = *v;
        }
    }
    Ok(CorrelationMatrix { labels: labels.to_vec(), values })
}

/// Principal submatrix restricted to `members` (in the given order).
pub fn cluster_submatrix(g: &CorrelationMatrix, members: &[usize]) -> Result<CorrelationMatrix> {
    if members.is_empty() {
        return Err(Error::validation("cluster has no members"));
    }
    if let Some(&bad) = members.iter().find(|&&m| m >= g.len()) {
        return Err(Error::validation(format!("member index {bad} out of range")));
    }
    let values = DMatrix::from_fn(members.len(), members.len(), |a, b| g.values[(members[a], members[b])]);
    let labels = members.iter().map(|&m| g.labels[m].clone()).collect();
    Ok(CorrelationMatrix { labels, values })
}
