use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Above this many factors `ln_choose` switches from a direct log sum to
/// log-gamma differences.
const DIRECT_SUM_LIMIT: u64 = 4096;

/// Natural log of the binomial coefficient `C(n, k)`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    if k <= DIRECT_SUM_LIMIT {
        (1..=k).map(|j| ((n - k + j) as f64 / j as f64).ln()).sum()
    } else {
        ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
    }
}

/// Over-representation p-value `P[X >= x]` for `X ~ Hypergeometric(N, K_s, n)`:
/// a population of `population` items, `successes` of which carry the
/// label, and a draw of `draws` items of which `observed` carry it.
pub fn hypergeometric_enrichment(population: u64, successes: u64, draws: u64, observed: u64) -> Result<f64> {
    if successes > population || draws > population {
        return Err(Error::validation(format!(
            "impossible hypergeometric parameters: N={population}, K={successes}, n={draws}"
        )));
    }
    let hi = successes.min(draws);
    if observed > hi {
        return Err(Error::validation(format!(
            "observed overlap {observed} exceeds min(K={successes}, n={draws})"
        )));
    }
    let lo = (successes + draws).saturating_sub(population);
    if observed <= lo {
        return Ok(1.0);
    }
    let ln_total = ln_choose(population, draws);
    // ln pmf(x), then the ratio recurrence pmf(k+1)/pmf(k) in log space.
    let mut ln_term = ln_choose(successes, observed) + ln_choose(population - successes, draws - observed) - ln_total;
    let mut terms = Vec::with_capacity((hi - observed + 1) as usize);
    terms.push(ln_term);
    for k in observed..hi {
        let num = ((successes - k) as f64) * ((draws - k) as f64);
        let den = ((k + 1) as f64) * ((population + k + 1 - successes - draws) as f64);
        ln_term += (num / den).ln();
        terms.push(ln_term);
    }
    let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - peak).exp()).sum();
    Ok((peak + sum.ln()).exp().clamp(0.0, 1.0))
}
