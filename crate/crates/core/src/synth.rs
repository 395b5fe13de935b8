//! Synthetic price panels with planted market, cluster and interaction
//! structure and planted long memory.
//!
//! Log-volatilities are built additively,
//!
//! ```text
//! omega_i(t) = b0_i F_0(t) + bk_i F_k(t) + sum_{k -> k'} s F_k'(t) + sigma e_i(t)
//! ```
//!
//! and turned into returns `r = 0.01 * sign * exp(omega)` with independent
//! random signs. Each factor mixes a long-memory process with white noise;
//! the long-memory part is a superposition of AR(1) components whose weights
//! make the autocorrelation decay roughly as a power law.

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel_io::{PricePanel, RawSeries};

/// Decay times of the AR(1) components, log-spaced over `[1, 1000]` days.
pub const AR_TIMESCALES: [f64; 5] = [1.0, 5.623_413_251_903_491, 31.622_776_601_683_793, 177.827_941_003_892_3, 1000.0];
const RETURN_SCALE: f64 = 0.01;
const START_PRICE: f64 = 100.0;

/// Loading of the stocks of cluster `from` on the factor of cluster `to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub from: usize,
    pub to: usize,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    /// Number of price dates (returns are one fewer).
    pub n_days: usize,
    pub cluster_sizes: Vec<usize>,
    /// Memory strength in `[0, 1]` of the market factor.
    pub market_memory: f64,
    /// Memory strength per cluster factor; empty means all zero.
    pub cluster_memory: Vec<f64>,
    pub market_loading: f64,
    pub cluster_loading: f64,
    /// Loadings are scaled by `1 + jitter * U(-1, 1)` per stock.
    pub loading_jitter: f64,
    /// Clusters are 0-based here.
    pub interactions: Vec<Interaction>,
    pub noise: f64,
    /// Return index at which each cluster forms; empty means every cluster
    /// exists throughout. Before its onset a late cluster's stocks are dealt
    /// round-robin onto the factors of the clusters present from the start.
    pub cluster_onset: Vec<usize>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_days: 3000,
            cluster_sizes: vec![20, 20, 20],
            market_memory: 0.8,
            cluster_memory: Vec::new(),
            market_loading: 0.6,
            cluster_loading: 0.6,
            loading_jitter: 0.3,
            interactions: Vec::new(),
            noise: 0.6,
            cluster_onset: Vec::new(),
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn n_stocks(&self) -> usize {
        self.cluster_sizes.iter().sum()
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_sizes.len()
    }

    fn cluster_strength(&self, k: usize) -> f64 {
        self.cluster_memory.get(k).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_days < 3 {
            return Err(Error::validation("synthetic panel needs at least 3 days"));
        }
        if self.cluster_sizes.is_empty() || self.cluster_sizes.contains(&0) {
            return Err(Error::validation("cluster sizes must be non-empty and positive"));
        }
        if self.n_stocks() < 2 {
            return Err(Error::validation("synthetic panel needs at least 2 stocks"));
        }
        let k = self.n_clusters();
        if !self.cluster_memory.is_empty() && self.cluster_memory.len() != k {
            return Err(Error::validation("cluster_memory must list one strength per cluster"));
        }
        if !self.cluster_onset.is_empty() && self.cluster_onset.len() != k {
            return Err(Error::validation("cluster_onset must list one day per cluster"));
        }
        if !self.cluster_onset.is_empty() && !self.cluster_onset.contains(&0) {
            return Err(Error::validation("at least one cluster must exist from the first day"));
        }
        let strengths = std::iter::once(self.market_memory).chain(self.cluster_memory.iter().copied());
        for s in strengths {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::validation(format!("memory strength {s} outside [0, 1]")));
            }
        }
        for (name, v) in [
            ("market_loading", self.market_loading),
            ("cluster_loading", self.cluster_loading),
            ("loading_jitter", self.loading_jitter),
            ("noise", self.noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be finite and >= 0")));
            }
        }
        for i in &self.interactions {
            if i.from >= k || i.to >= k || i.from == i.to || !(i.strength >= 0.0) {
                return Err(Error::validation(format!("invalid interaction {} -> {}", i.from, i.to)));
            }
        }
        Ok(())
    }
}

/// Planted structure behind a generated panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub tickers: Vec<String>,
    /// Cluster id per stock, 1-based.
    pub membership: Vec<usize>,
    pub market_betas: Vec<f64>,
    pub cluster_betas: Vec<f64>,
    pub interactions: Vec<Interaction>,
    /// Target decay exponent of each factor (market first).
    pub factor_exponents: Vec<f64>,
    /// Factor series, market first, one value per return.
    pub factors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SynthPanel {
    pub panel: PricePanel,
    pub truth: GroundTruth,
}

/// Power-law exponent targeted for a factor of memory strength `s`:
/// stronger memory decays more slowly.
pub fn target_exponent(strength: f64) -> f64 {
    1.2 - 0.8 * strength
}

/// Unit-variance stationary long-memory process whose autocorrelation decays
/// roughly as `L^-gamma` over lags 1..300.
pub fn long_memory_process<R: Rng + ?Sized>(gamma: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = AR_TIMESCALES.iter().map(|tau| tau.powf(-gamma)).collect();
    let total: f64 = raw.iter().sum();
    let mut out = vec![0.0; n];
    for (tau, w) in AR_TIMESCALES.iter().zip(raw) {
        let phi = (-1.0 / tau).exp();
        let innov = (1.0 - phi * phi).sqrt();
        let amp = (w / total).sqrt();
        let mut x: f64 = StandardNormal.sample(rng);
        for v in out.iter_mut() {
            *v += amp * x;
            let e: f64 = StandardNormal.sample(rng);
            x = phi * x + innov * e;
        }
    }
    out
}

/// `sqrt(s) * long memory + sqrt(1 - s) * white noise`, unit variance.
pub fn memory_factor<R: Rng + ?Sized>(strength: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let lm = long_memory_process(target_exponent(strength), n, rng);
    let (a, b) = (strength.sqrt(), (1.0 - strength).sqrt());
    lm.into_iter()
        .map(|v| {
            let e: f64 = StandardNormal.sample(rng);
            a * v + b * e
        })
        .collect()
}

/// Consecutive weekdays starting from `start`.
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

pub fn ticker_names(n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len().max(3);
    (0..n).map(|i| format!("S{i:0width$}")).collect()
}

pub fn generate_panel(spec: &SynthSpec) -> Result<SynthPanel> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let t = spec.n_days - 1;
    let k = spec.n_clusters();

    let mut factors = vec![memory_factor(spec.market_memory, t, &mut rng)];
    for c in 0..k {
        factors.push(memory_factor(spec.cluster_strength(c), t, &mut rng));
    }
    let exponents = std::iter::once(spec.market_memory)
        .chain((0..k).map(|c| spec.cluster_strength(c)))
        .map(target_exponent)
        .collect();

    let membership: Vec<usize> =
        spec.cluster_sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
    let n = membership.len();
    let jitter = |base: f64, rng: &mut ChaCha8Rng| base * (1.0 + spec.loading_jitter * rng.random_range(-1.0..1.0));
    let market_betas: Vec<f64> = (0..n).map(|_| jitter(spec.market_loading, &mut rng)).collect();
    let cluster_betas: Vec<f64> = (0..n).map(|_| jitter(spec.cluster_loading, &mut rng)).collect();
    let onset = |c: usize| spec.cluster_onset.get(c).copied().unwrap_or(0);
    let founders: Vec<usize> = (0..k).filter(|&c| onset(c) == 0).collect();
    // Factor followed by each stock before its cluster forms.
    let mut seen = vec![0usize; k];
    let host: Vec<usize> = membership
        .iter()
        .map(|&c| {
            seen[c] += 1;
            if onset(c) == 0 { c } else { founders[(seen[c] - 1) % founders.len()] }
        })
        .collect();

    let tickers = ticker_names(n);
    let dates = business_days(NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date"), spec.n_days);
    let mut prices = Vec::with_capacity(n);
    for i in 0..n {
        let c = membership[i];
        let mut log_price = START_PRICE.ln();
        let mut row = Vec::with_capacity(spec.n_days);
        row.push(START_PRICE);
        for s in 0..t {
            let mut omega = market_betas[i] * factors[0][s];
            let f = if s >= onset(c) { c } else { host[i] };
            omega += cluster_betas[i] * factors[f + 1][s];
            for inter in spec.interactions.iter().filter(|x| x.from == c) {
                omega += inter.strength * factors[inter.to + 1][s];
            }
            let e: f64 = StandardNormal.sample(&mut rng);
            omega += spec.noise * e;
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            log_price += sign * RETURN_SCALE * omega.exp();
            row.push(log_price.exp());
        }
        prices.push(row);
    }

    let panel = PricePanel::new(tickers.clone(), dates, prices)?;
    let truth = GroundTruth {
        tickers,
        membership: membership.iter().map(|c| c + 1).collect(),
        market_betas,
        cluster_betas,
        interactions: spec.interactions.clone(),
        factor_exponents: exponents,
        factors,
    };
    Ok(SynthPanel { panel, truth })
}

/// Remove a random `fraction` of observations (never the first date) from
/// every series, producing gaps for the cleaning step to fill.
pub fn drop_random_cells(panel: &PricePanel, fraction: f64, seed: u64) -> Vec<RawSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    panel
        .to_series()
        .into_iter()
        .map(|s| {
            let keep: Vec<bool> = (0..s.len()).map(|j| j == 0 || !rng.random_bool(fraction)).collect();
            RawSeries { ticker: s.ticker.clone(), dates: pick(&s.dates, &keep), prices: pick(&s.prices, &keep) }
        })
        .collect()
}

fn pick<T: Copy>(values: &[T], keep: &[bool]) -> Vec<T> {
    values.iter().zip(keep).filter(|(_, k)| **k).map(|(x, _)| *x).collect()
}
