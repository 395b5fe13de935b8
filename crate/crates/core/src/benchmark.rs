//! Baseline residual models: principal components and principal-axis factor
//! analysis with varimax rotation. Each removes the same number of factors as
//! the log-volatility model so the remaining memory can be compared.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{memory_profile_with, MemoryConfig};
use crate::pipeline::LogVolPanel;
use crate::stats::{correlation, symmetric_eigen};

pub const FA_TOL: f64 = 1e-6;
pub const FA_MAX_ITER: usize = 200;
pub const HEYWOOD_CAP: f64 = 1.0 - 1e-6;
const VARIMAX_TOL: f64 = 1e-12;
const VARIMAX_MAX_SWEEPS: usize = 1000;
// Relative eigenvalue cutoff for the pseudo-inverse of E.
const PINV_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadingMatrix {
    /// `N x F`.
    pub loadings: DMatrix<f64>,
    /// `1 - communality`; factor analysis only.
    pub uniquenesses: Option<Vec<f64>>,
    pub n_factors: usize,
}

impl LoadingMatrix {
    /// Row sums of squared loadings.
    pub fn communalities(&self) -> Vec<f64> {
        self.loadings.row_iter().map(|r| r.norm_squared()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct PcaFit {
    /// Top eigenvectors of E as columns.
    pub components: LoadingMatrix,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct FaFit {
    pub loadings: LoadingMatrix,
    /// Orthogonal `F x F` matrix taking unrotated to rotated loadings.
    pub rotation: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Some communality exceeded one and was capped.
    pub heywood: bool,
    pub varimax_trace: Vec<f64>,
    pub residuals: Vec<Vec<f64>>,
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let t = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), t, |i, s| rows[i][s])
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn pca_residual_panel(omega: &LogVolPanel, n_components: usize) -> Result<PcaFit> {
    let n = omega.n_stocks();
    if n_components == 0 || n_components >= n {
        return Err(Error::validation(format!("number of components must be in 1..{n}, got {n_components}")));
    }
    let e = correlation(&omega.tickers, &omega.omega)?;
    let pairs = symmetric_eigen(&e.values)?;
    let v = pairs.vectors.columns(0, n_components).into_owned();
    let x = to_matrix(&omega.omega);
    let scores = v.transpose() * &x;
    let residuals = to_rows(&(&x - &v * scores));
    Ok(PcaFit {
        components: LoadingMatrix { loadings: v, uniquenesses: None, n_factors: n_components },
        eigenvalues: pairs.values[..n_components].to_vec(),
        residuals,
    })
}

/// Unrotated principal-axis loadings of a correlation matrix. Returns the
/// loadings, the iteration count, convergence and whether a Heywood case
/// was capped on the final iteration.
pub fn principal_axis(e: &DMatrix<f64>, n_factors: usize) -> Result<(DMatrix<f64>, usize, bool, bool)> {
    let n = e.nrows();
    let mut h2: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| e[(i, j)].abs()).fold(0.0, f64::max))
        .collect();
    let mut loadings = DMatrix::zeros(n, n_factors);
    let mut heywood = false;
    for iter in 1..=FA_MAX_ITER {
        let mut reduced = e.clone();
        for (i, h) in h2.iter().enumerate() {
            reduced[(i, i)] = *h;
        }
        let pairs = symmetric_eigen(&reduced)?;
        loadings = DMatrix::from_fn(n, n_factors, |i, f| pairs.vectors[(i, f)] * pairs.values[f].max(0.0).sqrt());
        heywood = false;
        let mut change: f64 = 0.0;
        for (i, h) in h2.iter_mut().enumerate() {
            let mut next = loadings.row(i).norm_squared();
            if next > 1.0 {
                heywood = true;
                next = HEYWOOD_CAP;
                let scale = (next / loadings.row(i).norm_squared()).sqrt();
                loadings.row_mut(i).scale_mut(scale);
            }
            change = change.max((next - *h).abs());
            *h = next;
        }
        if change < FA_TOL {
            return Ok((loadings, iter, true, heywood));
        }
    }
    Ok((loadings, FA_MAX_ITER, false, heywood))
}

/// `sum_f [N sum_i l_if^4 - (sum_i l_if^2)^2] / N^2`
pub fn varimax_criterion(l: &DMatrix<f64>) -> f64 {
    let n = l.nrows() as f64;
    l.column_iter()
        .map(|c| {
            let s2: f64 = c.iter().map(|v| v * v).sum();
            let s4: f64 = c.iter().map(|v| v.powi(4)).sum();
            (n * s4 - s2 * s2) / (n * n)
        })
        .sum()
}

/// Varimax by successive planar rotations of column pairs, each solved
/// exactly, with Kaiser row normalization. Returns the rotated loadings,
/// the rotation and the criterion (on normalized loadings) after each sweep.
pub fn varimax(l: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
    let (n, f) = l.shape();
    let norms: Vec<f64> = l.row_iter().map(|r| r.norm()).collect();
    let mut a = DMatrix::from_fn(n, f, |i, j| if norms[i] > 0.0 { l[(i, j)] / norms[i] } else { 0.0 });
    let mut rot = DMatrix::<f64>::identity(f, f);
    let mut trace = vec![varimax_criterion(&a)];
    let nf = n as f64;
    for _ in 0..VARIMAX_MAX_SWEEPS {
        let mut largest: f64 = 0.0;
        for p in 0..f {
            for q in p + 1..f {
                let (mut sa, mut sb, mut sc, mut sd) = (0.0, 0.0, 0.0, 0.0);
                for i in 0..n {
                    let (x, y) = (a[(i, p)], a[(i, q)]);
                    let u = x * x - y * y;
                    let v = 2.0 * x * y;
                    sa += u;
                    sb += v;
                    sc += u * u - v * v;
                    sd += 2.0 * u * v;
                }
                let num = sd - 2.0 * sa * sb / nf;
                let den = sc - (sa * sa - sb * sb) / nf;
                let phi = num.atan2(den) / 4.0;
                if phi.abs() < VARIMAX_TOL {
                    continue;
                }
                largest = largest.max(phi.abs());
                let (s, c) = phi.sin_cos();
                for m in [&mut a, &mut rot] {
                    for i in 0..m.nrows() {
                        let (x, y) = (m[(i, p)], m[(i, q)]);
                        m[(i, p)] = c * x + s * y;
                        m[(i, q)] = -s * x + c * y;
                    }
                }
            }
        }
        trace.push(varimax_criterion(&a));
        if largest < VARIMAX_TOL.sqrt() * 1e-2 {
            break;
        }
    }
    (l * &rot, rot, trace)
}

/// Moore–Penrose inverse of a symmetric positive semi-definite matrix.
fn pinv_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let pairs = symmetric_eigen(m)?;
    let cutoff = pairs.values[0].abs() * PINV_RTOL * m.nrows() as f64;
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (k, &lam) in pairs.values.iter().enumerate() {
        if lam > cutoff {
            let v = pairs.vectors.column(k);
            out += (v * v.transpose()) / lam;
        }
    }
    Ok(out)
}

pub fn fa_fit_varimax(omega: &LogVolPanel, n_factors: usize) -> Result<FaFit> {
    let n = omega.n_stocks();
    if n_factors == 0 || 2 * n_factors >= n {
        return Err(Error::validation(format!("number of factors must be at least 1 and below N/2 = {n}/2")));
    }
    let e = correlation(&omega.tickers, &omega.omega)?;
    let (raw, iterations, converged, heywood) = principal_axis(&e.values, n_factors)?;
    let (loadings, rotation, varimax_trace) = if n_factors > 1 {
        varimax(&raw)
    } else {
        (raw.clone(), DMatrix::identity(1, 1), vec![varimax_criterion(&raw)])
    };
    // Regression scores: L^T E^+ omega.
    let x = to_matrix(&omega.omega);
    let scores = loadings.transpose() * pinv_psd(&e.values)? * &x;
    let residuals = to_rows(&(&x - &loadings * scores));
    let comm: Vec<f64> = loadings.row_iter().map(|r| r.norm_squared()).collect();
    Ok(FaFit {
        loadings: LoadingMatrix {
            uniquenesses: Some(comm.iter().map(|h| (1.0 - h).clamp(0.0, 1.0)).collect()),
            loadings,
            n_factors,
        },
        rotation,
        iterations,
        converged,
        heywood,
        varimax_trace,
        residuals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub fraction: f64,
    pub share: f64,
}

/// Empirical CDF of `eta(residual) / eta_plain` over the stocks whose
/// baseline eta is positive.
pub fn residual_memory_cdf(residuals: &[Vec<f64>], baseline_eta: &[f64], config: &MemoryConfig) -> Result<Vec<CdfPoint>> {
    if residuals.len() != baseline_eta.len() {
        return Err(Error::validation("one baseline eta per residual series is required"));
    }
    let mut fractions: Vec<f64> = residuals
        .par_iter()
        .zip(baseline_eta)
        .filter(|(_, b)| **b > 0.0)
        .map(|(r, b)| Ok((memory_profile_with(r, config)?.eta / b).max(0.0)))
        .collect::<Result<_>>()?;
    fractions.sort_by(f64::total_cmp);
    let n = fractions.len() as f64;
    Ok(fractions.into_iter().enumerate().map(|(i, f)| CdfPoint { fraction: f, share: (i + 1) as f64 / n }).collect())
}

/// Share of stocks whose residual fraction is at most `x`.
pub fn share_below(cdf: &[CdfPoint], x: f64) -> f64 {
    cdf.iter().take_while(|p| p.fraction <= x).last().map_or(0.0, |p| p.share)
}

/// Smallest fraction reached by at least `share` of the stocks.
pub fn fraction_at_share(cdf: &[CdfPoint], share: f64) -> Option<f64> {
    cdf.iter().find(|p| p.share >= share - 1e-12).map(|p| p.fraction)
}

pub struct ModelInput<'a> {
    pub omega: &'a LogVolPanel,
    pub n_factors: usize,
    /// Per-stock residuals of the cluster decomposition, if it has been run.
    pub decomposed: Option<&'a [Vec<f64>]>,
}

pub trait ResidualModel: Send + Sync {
    fn name(&self) -> &'static str;
    fn residuals(&self, input: &ModelInput) -> Result<Vec<Vec<f64>>>;
}

/// Residuals of the cluster decomposition.
pub struct LogVolModel;

impl ResidualModel for LogVolModel {
    fn name(&self) -> &'static str {
        "logvol"
    }

    fn residuals(&self, input: &ModelInput) -> Result<Vec<Vec<f64>>> {
        let res = input.decomposed.ok_or_else(|| Error::validation("the logvol model needs a decomposition"))?;
        if res.len() != input.omega.n_stocks() {
            return Err(Error::validation("decomposition residuals do not match the panel"));
        }
        Ok(res.to_vec())
    }
}

pub struct PcaModel;

impl ResidualModel for PcaModel {
    fn name(&self) -> &'static str {
        "pca"
    }

    fn residuals(&self, input: &ModelInput) -> Result<Vec<Vec<f64>>> {
        Ok(pca_residual_panel(input.omega, input.n_factors)?.residuals)
    }
}

pub struct FaModel;

impl ResidualModel for FaModel {
    fn name(&self) -> &'static str {
        "fa"
    }

    fn residuals(&self, input: &ModelInput) -> Result<Vec<Vec<f64>>> {
        Ok(fa_fit_varimax(input.omega, input.n_factors)?.residuals)
    }
}

pub struct ModelRegistry {
    models: Vec<Arc<dyn ResidualModel>>,
}

impl ModelRegistry {
    pub fn empty() -> Self {
        ModelRegistry { models: Vec::new() }
    }

    pub fn register(&mut self, model: Arc<dyn ResidualModel>) {
        self.models.retain(|m| m.name() != model.name());
        self.models.push(model);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ResidualModel>> {
        self.models.iter().find(|m| m.name() == name).cloned().ok_or_else(|| Error::UnknownStrategy {
            kind: "residual model",
            name: name.to_string(),
            available: self.names().join(", "),
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.models.iter().map(|m| m.name()).collect()
    }
}

impl Default for ModelRegistry {
    fn default() -> Self {
        let mut r = ModelRegistry::empty();
        r.register(Arc::new(LogVolModel));
        r.register(Arc::new(PcaModel));
        r.register(Arc::new(FaModel));
        r
    }
}
