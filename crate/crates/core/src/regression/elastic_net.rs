//! Elastic-net regression by covariance-mode coordinate descent.
//!
//! The objective is
//!
//! ```text
//! (1/2T) sum_t (y_t - b0 - x_t . b)^2 + lambda * sum_j ((1-a) b_j^2 / 2 + a |b_j|)
//! ```
//!
//! with an unpenalized intercept `b0`. `a = 0` is ridge, `a = 1` is lasso.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinate descent stops once no coefficient moves by more than this.
pub const CONVERGENCE_TOL: f64 = 1e-7;
pub const MAX_SWEEPS: usize = 100_000;
pub const MIN_PERMUTATIONS: usize = 99;
const ACTIVE_SET_EVERY: usize = 5;

/// Cross-validated elastic-net fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetFit {
    pub betas: Vec<f64>,
    pub intercept: f64,
    pub a: f64,
    pub lambda: f64,
    pub cv_error: f64,
    /// Circular-shift permutation p-values, once computed.
    pub p_values: Option<Vec<f64>>,
}

/// Output of a single solve at fixed `(a, lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnetSolution {
    pub betas: Vec<f64>,
    pub intercept: f64,
    pub sweeps: usize,
    /// Objective after each sweep (only filled by [`elastic_net_solve_traced`]).
    pub objective_trace: Vec<f64>,
}

/// Sufficient statistics of a regression problem over a subset of rows.
#[derive(Debug, Clone)]
struct Gram {
    m: usize,
    /// Row-major `m x m`, `(1/n) sum (x_j - mean_j)(x_k - mean_k)`.
    gram: Vec<f64>,
    /// `(1/n) sum (x_j - mean_j)(y - mean_y)`
    xty: Vec<f64>,
    x_mean: Vec<f64>,
    y_mean: f64,
    /// `(1/n) sum (y - mean_y)^2`
    yy: f64,
}

impl Gram {
    fn build(y: &[f64], cols: &[&[f64]], rows: &[usize]) -> Gram {
        let m = cols.len();
        let n = rows.len() as f64;
        let y_mean = rows.iter().map(|&t| y[t]).sum::<f64>() / n;
        let x_mean: Vec<f64> = cols.iter().map(|c| rows.iter().map(|&t| c[t]).sum::<f64>() / n).collect();
        let yc: Vec<f64> = rows.iter().map(|&t| y[t] - y_mean).collect();
        let xc: Vec<Vec<f64>> = cols
            .iter()
            .zip(&x_mean)
            .map(|(c, mu)| rows.iter().map(|&t| c[t] - mu).collect())
            .collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>() / n;
        let mut gram = vec![0.0; m * m];
        for j in 0..m {
            for k in j..m {
                let v = dot(&xc[j], &xc[k]);
                gram[j * m + k] = v;
                gram[k * m + j] = v;
            }
        }
        let xty = xc.iter().map(|c| dot(c, &yc)).collect();
        Gram { m, gram, xty, x_mean, y_mean, yy: dot(&yc, &yc) }
    }

    /// Copy with column `j` replaced by `col`, which must have the same
    /// mean and variance as the original (e.g. a circular shift of it).
    fn with_shifted_column(&self, j: usize, col: &[f64], y: &[f64], cols: &[&[f64]]) -> Gram {
        let n = y.len() as f64;
        let mut g = self.clone();
        let mu = self.x_mean[j];
        for k in 0..self.m {
            if k == j {
                continue;
            }
            let muk = self.x_mean[k];
            let v = col.iter().zip(cols[k]).map(|(a, b)| (a - mu) * (b - muk)).sum::<f64>() / n;
            g.gram[j * self.m + k] = v;
            g.gram[k * self.m + j] = v;
        }
        g.xty[j] = col.iter().zip(y).map(|(a, b)| (a - mu) * (b - self.y_mean)).sum::<f64>() / n;
        g
    }

    fn objective(&self, beta: &[f64], a: f64, lambda: f64) -> f64 {
        let m = self.m;
        let mut quad = 0.0;
        for j in 0..m {
            for k in 0..m {
                quad += beta[j] * self.gram[j * m + k] * beta[k];
            }
        }
        let lin: f64 = beta.iter().zip(&self.xty).map(|(b, c)| b * c).sum();
        let penalty: f64 = beta.iter().map(|b| (1.0 - a) * b * b / 2.0 + a * b.abs()).sum();
        0.5 * (self.yy - 2.0 * lin + quad) + lambda * penalty
    }

    fn intercept(&self, beta: &[f64]) -> f64 {
        self.y_mean - beta.iter().zip(&self.x_mean).map(|(b, mu)| b * mu).sum::<f64>()
    }

    /// Coordinate descent from the current contents of `beta`.
    fn solve(&self, a: f64, lambda: f64, beta: &mut [f64], mut trace: Option<&mut Vec<f64>>) -> Result<usize> {
        let m = self.m;
        let l1 = lambda * a;
        let l2 = lambda * (1.0 - a);
        for sweep in 1..=MAX_SWEEPS {
            let mut max_delta: f64 = 0.0;
            for j in 0..m {
                let row = &self.gram[j * m..(j + 1) * m];
                let mut z = self.xty[j];
                for (k, (g, b)) in row.iter().zip(beta.iter()).enumerate() {
                    if k != j {
                        z -= g * b;
                    }
                }
                let denom = row[j] + l2;
                let updated = if denom > 0.0 { soft_threshold(z, l1) / denom } else { 0.0 };
                max_delta = max_delta.max((updated - beta[j]).abs());
                beta[j] = updated;
            }
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(self.objective(beta, a, lambda));
            }
            if max_delta < CONVERGENCE_TOL {
                return Ok(sweep);
            }
            if sweep % ACTIVE_SET_EVERY == 0 {
                self.active_set_step(a, lambda, beta);
            }
        }
        Err(Error::ElasticNetNonConvergence { sweeps: MAX_SWEEPS, last: beta.to_vec() })
    }
}

impl Gram {
    /// Jump to the exact minimizer on the current active set and sign
    /// pattern. Coordinate descent crawls when predictors are strongly
    /// correlated; the jump is kept only if it preserves the signs and lowers
    /// the objective, so the fixed point and stopping rule are unchanged.
    fn active_set_step(&self, a: f64, lambda: f64, beta: &mut [f64]) {
        let active: Vec<usize> = (0..self.m).filter(|&j| beta[j] != 0.0).collect();
        if active.is_empty() {
            return;
        }
        let p = active.len();
        let (l1, l2) = (lambda * a, lambda * (1.0 - a));
        let lhs = DMatrix::from_fn(p, p, |r, c| {
            self.gram[active[r] * self.m + active[c]] + if r == c { l2 } else { 0.0 }
        });
        let rhs = DVector::from_fn(p, |r, _| self.xty[active[r]] - l1 * beta[active[r]].signum());
        let Some(chol) = lhs.cholesky() else { return };
        let sol = chol.solve(&rhs);
        if active.iter().zip(sol.iter()).any(|(&j, v)| v.signum() != beta[j].signum()) {
            return;
        }
        let mut candidate = vec![0.0; self.m];
        for (&j, v) in active.iter().zip(sol.iter()) {
            candidate[j] = *v;
        }
        if self.objective(&candidate, a, lambda) <= self.objective(beta, a, lambda) {
            beta.copy_from_slice(&candidate);
        }
    }
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

fn validate(y: &[f64], x: &[Vec<f64>]) -> Result<()> {
    if y.len() < 2 {
        return Err(Error::validation("elastic net needs at least 2 observations"));
    }
    if let Some(j) = x.iter().position(|c| c.len() != y.len()) {
        return Err(Error::validation(format!("predictor {j} has length {} (expected {})", x[j].len(), y.len())));
    }
    if y.iter().chain(x.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::validation("elastic net input contains a non-finite value"));
    }
    Ok(())
}

fn validate_hyper(a: f64, lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::validation(format!("mixing parameter a={a} outside [0, 1]")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::validation(format!("penalty lambda={lambda} must be finite and >= 0")));
    }
    Ok(())
}

fn col_refs(x: &[Vec<f64>]) -> Vec<&[f64]> {
    x.iter().map(Vec::as_slice).collect()
}

/// Solve at a fixed `(a, lambda)`. `x` holds one vector per predictor.
pub fn elastic_net_solve(y: &[f64], x: &[Vec<f64>], a: f64, lambda: f64) -> Result<EnetSolution> {
    solve_inner(y, x, a, lambda, false)
}

/// As [`elastic_net_solve`], recording the objective after every sweep.
pub fn elastic_net_solve_traced(y: &[f64], x: &[Vec<f64>], a: f64, lambda: f64) -> Result<EnetSolution> {
    solve_inner(y, x, a, lambda, true)
}

fn solve_inner(y: &[f64], x: &[Vec<f64>], a: f64, lambda: f64, traced: bool) -> Result<EnetSolution> {
    validate(y, x)?;
    validate_hyper(a, lambda)?;
    let rows: Vec<usize> = (0..y.len()).collect();
    let gram = Gram::build(y, &col_refs(x), &rows);
    let mut beta = vec![0.0; x.len()];
    let mut trace = Vec::new();
    let sweeps = gram.solve(a, lambda, &mut beta, traced.then_some(&mut trace))?;
    Ok(EnetSolution { intercept: gram.intercept(&beta), betas: beta, sweeps, objective_trace: trace })
}

/// `a` in `{0, 0.1, ..., 1}`.
pub fn default_a_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Smallest lambda that zeroes every coefficient of the lasso (`a = 1`).
pub fn lambda_max(y: &[f64], x: &[Vec<f64>]) -> Result<f64> {
    validate(y, x)?;
    let rows: Vec<usize> = (0..y.len()).collect();
    let gram = Gram::build(y, &col_refs(x), &rows);
    Ok(gram.xty.iter().fold(0.0, |acc: f64, c| acc.max(c.abs())))
}

/// `n` log-spaced values from `lambda_max` down to `ratio * lambda_max`.
pub fn default_lambda_grid(y: &[f64], x: &[Vec<f64>], n: usize, ratio: f64) -> Result<Vec<f64>> {
    if n == 0 || !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::validation("lambda grid needs n >= 1 and ratio in (0, 1)"));
    }
    let top = lambda_max(y, x)?;
    if n == 1 {
        return Ok(vec![top]);
    }
    let step = ratio.ln() / (n - 1) as f64;
    Ok((0..n).map(|i| top * (step * i as f64).exp()).collect())
}

/// K-fold cross-validation over an `(a, lambda)` grid with contiguous time
/// blocks as folds. The selected pair minimizes the pooled out-of-fold mean
/// squared error; ties go to the larger lambda, then the larger `a`.
pub fn elastic_net_cv(
    y: &[f64],
    x: &[Vec<f64>],
    a_grid: &[f64],
    lambda_grid: &[f64],
    folds: usize,
) -> Result<ElasticNetFit> {
    validate(y, x)?;
    if a_grid.is_empty() || lambda_grid.is_empty() {
        return Err(Error::validation("elastic net grids must be non-empty"));
    }
    for &a in a_grid {
        for &l in lambda_grid {
            validate_hyper(a, l)?;
        }
    }
    if folds < 2 {
        return Err(Error::validation("cross-validation needs at least 2 folds"));
    }
    let t = y.len();
    if t / folds < 2 {
        return Err(Error::validation(format!("{t} observations give folds smaller than 2 for {folds} folds")));
    }

    // Descending lambda order for warm starts.
    let mut lam_order: Vec<usize> = (0..lambda_grid.len()).collect();
    lam_order.sort_by(|&p, &q| lambda_grid[q].total_cmp(&lambda_grid[p]).then(p.cmp(&q)));

    let cols = col_refs(x);
    let m = x.len();
    let mut sse = vec![0.0; a_grid.len() * lambda_grid.len()];
    for f in 0..folds {
        let lo = f * t / folds;
        let hi = (f + 1) * t / folds;
        let train: Vec<usize> = (0..lo).chain(hi..t).collect();
        let gram = Gram::build(y, &cols, &train);
        for (ai, &a) in a_grid.iter().enumerate() {
            let mut beta = vec![0.0; m];
            for &li in &lam_order {
                gram.solve(a, lambda_grid[li], &mut beta, None)?;
                let b0 = gram.intercept(&beta);
                let err: f64 = (lo..hi)
                    .map(|s| {
                        let pred = b0 + (0..m).map(|j| beta[j] * x[j][s]).sum::<f64>();
                        (y[s] - pred).powi(2)
                    })
                    .sum();
                sse[ai * lambda_grid.len() + li] += err;
            }
        }
    }

    let mut best: Option<(f64, f64, f64)> = None; // (error, lambda, a)
    for (ai, &a) in a_grid.iter().enumerate() {
        for (li, &l) in lambda_grid.iter().enumerate() {
            let err = sse[ai * lambda_grid.len() + li] / t as f64;
            let better = match best {
                None => true,
                Some((be, bl, ba)) => err < be || (err == be && (l > bl || (l == bl && a > ba))),
            };
            if better {
                best = Some((err, l, a));
            }
        }
    }
    let (cv_error, lambda, a) = best.expect("non-empty grid");
    let sol = elastic_net_solve(y, x, a, lambda)?;
    Ok(ElasticNetFit { betas: sol.betas, intercept: sol.intercept, a, lambda, cv_error, p_values: None })
}

/// Circular-shift permutation p-values for every predictor of `fit`.
///
/// Predictor `j` is shifted by `m * T / (n_perm + 1)` for `m = 1..=n_perm`,
/// which keeps its autocorrelation intact, and the model is refit at the
/// fit's `(a, lambda)`. The p-value is `(1 + #{|b_j'| >= |b_j|}) / (n_perm + 1)`.
/// Predictors the fit zeroed out get `p = 1`.
pub fn predictor_significance(fit: &ElasticNetFit, y: &[f64], x: &[Vec<f64>], n_perm: usize) -> Result<Vec<f64>> {
    validate(y, x)?;
    validate_hyper(fit.a, fit.lambda)?;
    if fit.betas.len() != x.len() {
        return Err(Error::validation("fit and design disagree on the number of predictors"));
    }
    if n_perm < MIN_PERMUTATIONS {
        return Err(Error::validation(format!("at least {MIN_PERMUTATIONS} permutations are required")));
    }
    let t = y.len();
    if t <= n_perm {
        return Err(Error::validation(format!("{t} observations cannot give {n_perm} distinct circular shifts")));
    }
    let rows: Vec<usize> = (0..t).collect();
    let cols = col_refs(x);
    let base = Gram::build(y, &cols, &rows);
    let mut p_values = Vec::with_capacity(x.len());
    for (j, &observed) in fit.betas.iter().enumerate() {
        if observed == 0.0 {
            p_values.push(1.0);
            continue;
        }
        let mut hits = 0usize;
        let mut shifted = vec![0.0; t];
        for perm in 1..=n_perm {
            let shift = perm * t / (n_perm + 1);
            for (s, v) in shifted.iter_mut().enumerate() {
                *v = x[j][(s + shift) % t];
            }
            let gram = base.with_shifted_column(j, &shifted, y, &cols);
            let mut beta = fit.betas.clone();
            gram.solve(fit.a, fit.lambda, &mut beta, None)?;
            if beta[j].abs() >= observed.abs() {
                hits += 1;
            }
        }
        p_values.push((1 + hits) as f64 / (n_perm + 1) as f64);
    }
    Ok(p_values)
}
