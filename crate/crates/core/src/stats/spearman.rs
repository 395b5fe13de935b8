use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Sidedness of a rank-correlation test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    Greater,
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpearmanResult {
    pub rho: f64,
    pub p: f64,
}

/// 1-based ranks, ties receiving the average of the ranks they span.
pub fn rank_average(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation with a large-sample t approximation for `p`.
pub fn spearman(x: &[f64], y: &[f64], alternative: Alternative) -> Result<SpearmanResult> {
    if x.len() != y.len() {
        return Err(Error::validation("spearman inputs differ in length"));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::validation("spearman needs at least 3 observations"));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::validation("spearman input contains NaN"));
    }
    let (rx, ry) = (rank_average(x), rank_average(y));
    let rho = super::pearson(&rx, &ry);
    if !rho.is_finite() {
        return Err(Error::validation("spearman input is constant; ranks are degenerate"));
    }
    let rho = rho.clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    let upper = |t: f64| if t.is_infinite() { if t > 0.0 { 0.0 } else { 1.0 } } else { dist.sf(t) };
    let t = if rho.abs() == 1.0 { rho * f64::INFINITY } else { rho * (df / (1.0 - rho * rho)).sqrt() };
    let p = match alternative {
        Alternative::Greater => upper(t),
        Alternative::Less => upper(-t),
        Alternative::TwoSided => (2.0 * upper(t.abs())).min(1.0),
    };
    Ok(SpearmanResult { rho, p })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive permutation p-value, used only to sanity check the t route.
    fn permutation_p_greater(x: &[f64], y: &[f64]) -> f64 {
        fn permute(k: usize, idx: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if k == idx.len() {
                out.push(idx.clone());
                return;
            }
            for i in k..idx.len() {
                idx.swap(k, i);
                permute(k + 1, idx, out);
                idx.swap(k, i);
            }
        }
        let observed = spearman(x, y, Alternative::Greater).unwrap().rho;
        let mut perms = Vec::new();
        permute(0, &mut (0..y.len()).collect(), &mut perms);
        let hits = perms
            .iter()
            .filter(|p| {
                let yp: Vec<f64> = p.iter().map(|&i| y[i]).collect();
                spearman(x, &yp, Alternative::Greater).unwrap().rho >= observed - 1e-12
            })
            .count();
        hits as f64 / perms.len() as f64
    }

    #[test]
    fn monotone_map_is_one() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let r = spearman(&x, &y, Alternative::Greater).unwrap();
        assert_eq!(r.rho, 1.0);
        assert_eq!(r.p, 0.0);
    }

    #[test]
    fn reversal_is_minus_one() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        let r = spearman(&x, &y, Alternative::TwoSided).unwrap();
        assert_eq!(r.rho, -1.0);
        assert_eq!(spearman(&x, &y, Alternative::Less).unwrap().p, 0.0);
    }

    #[test]
    fn constant_input_rejected() {
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], Alternative::TwoSided).is_err());
    }

    #[test]
    fn ties_get_average_rank() {
        assert_eq!(rank_average(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn t_approximation_tracks_permutation_p() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let y = [2.0, 1.0, 4.0, 3.0, 7.0, 5.0, 6.0];
        let exact = permutation_p_greater(&x, &y);
        let approx = spearman(&x, &y, Alternative::Greater).unwrap().p;
        assert!((exact - approx).abs() < 0.02, "exact {exact} approx {approx}");
    }

    #[test]
    fn sidedness_is_consistent() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let y = [2.0, 1.0, 4.0, 3.0, 6.0, 5.0, 8.0, 7.0];
        let g = spearman(&x, &y, Alternative::Greater).unwrap().p;
        let l = spearman(&x, &y, Alternative::Less).unwrap().p;
        let t = spearman(&x, &y, Alternative::TwoSided).unwrap().p;
        assert!((g + l - 1.0).abs() < 1e-12);
        assert!((t - 2.0 * g.min(l)).abs() < 1e-12);
    }
}
