//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the verdict lines are
//! printed even when everything passes. The suite is a report: verdicts go
//! to stdout and the exit code stays zero, so a statistically expected miss
//! does not mask the rest of the test run. Set `VOLFACTOR_ACCEPTANCE_STRICT`
//! to exit nonzero when any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use volfactor::benchmark::{
    principal_axis, residual_memory_cdf, share_below, varimax, ModelInput, ModelRegistry, PcaModel, FaModel,
    ResidualModel,
};
use volfactor::dbht::{adjusted_rand_index, cluster_correlation, Clustering};
use volfactor::memory::{memory_profile, theil_sen_slope, MemoryConfig};
use volfactor::pipeline::{
    bonferroni_divisor, decompose, log_abs_transform, log_returns, memory_filtration, memory_relations, scatter_rows,
    sector_enrichment, select_cluster_factors, Decomposition, EnetConfig, FiltrationReport, LogVolPanel,
    PipelineConfig,
};
use volfactor::regression::elastic_net_solve;
use volfactor::rolling::{make_windows, rolling_pipeline, RollingConfig};
use volfactor::stats::{correlation, hypergeometric_enrichment, spearman, standardize, symmetric_eigen, Alternative, CorrelationMatrix};
use volfactor::synth::{generate_panel, SynthSpec};
use volfactor::weights::SchemeRegistry;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn omega_of(spec: &SynthSpec) -> (LogVolPanel, Vec<usize>) {
    let sp = generate_panel(spec).expect("synthetic panel");
    let om = log_abs_transform(&log_returns(&sp.panel).expect("returns")).expect("log-volatility");
    (om, sp.truth.membership)
}

fn run_pipeline(om: &LogVolPanel) -> (Decomposition, FiltrationReport) {
    let config = PipelineConfig { enet: EnetConfig { n_perm: 0, ..EnetConfig::default() }, ..PipelineConfig::default() };
    let dec = decompose(om, &config, &SchemeRegistry::default()).expect("decomposition");
    let rep = memory_filtration(&dec.tickers, &dec.clustering, &dec.stage_series(om), &MemoryConfig::default())
        .expect("filtration");
    (dec, rep)
}

/// Planted label carried by most members of a fitted cluster.
fn majority_truth(clustering: &Clustering, k: usize, truth: &[usize]) -> usize {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for i in clustering.members(k) {
        *counts.entry(truth[i]).or_default() += 1;
    }
    counts.into_iter().max_by_key(|&(label, c)| (c, std::cmp::Reverse(label))).map(|(l, _)| l).unwrap_or(0)
}

// ---------------------------------------------------------------- 1

fn oracle_median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

fn biguint_choose(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

fn exact_tail(population: u64, successes: u64, draws: u64, observed: u64) -> f64 {
    let total = biguint_choose(population, draws);
    let mut num = BigUint::zero();
    for x in observed..=successes.min(draws) {
        num += biguint_choose(successes, x) * biguint_choose(population - successes, draws - x);
    }
    BigRational::new(num.into(), total.into()).to_f64().expect("finite ratio")
}

fn rank_oracle_spearman(x: &[f64], y: &[f64]) -> f64 {
    // Continuous draws have no ties, so the classical d^2 formula applies.
    let rank = |v: &[f64], i: usize| v.iter().filter(|&&w| w < v[i]).count() as f64 + 1.0;
    let n = x.len() as f64;
    let d2: f64 = (0..x.len()).map(|i| (rank(x, i) - rank(y, i)).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

fn criterion_estimators() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut theil_exact = 0;
    for f in 0..100 {
        let n = rng.random_range(2..=50);
        // Every fourth fixture repeats abscissae to exercise the distinct-x rule.
        let x: Vec<f64> =
            (0..n).map(|_| if f % 4 == 0 { rng.random_range(0..8) as f64 } else { rng.random_range(-5.0..5.0) }).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.7 * v + rng.random_range(-1.0..1.0)).collect();
        let mut slopes = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i < j && x[i] != x[j] {
                    slopes.push((y[j] - y[i]) / (x[j] - x[i]));
                }
            }
        }
        match theil_sen_slope(&x, &y) {
            Ok(s) if !slopes.is_empty() && s == oracle_median(slopes.clone()) => theil_exact += 1,
            Err(_) if slopes.is_empty() => theil_exact += 1,
            _ => {}
        }
    }

    let mut hyper_worst: f64 = 0.0;
    for _ in 0..50 {
        let population = rng.random_range(10..=400u64);
        let successes = rng.random_range(1..=population);
        let draws = rng.random_range(1..=population);
        let lo = (successes + draws).saturating_sub(population);
        let observed = rng.random_range(lo..=successes.min(draws));
        let got = hypergeometric_enrichment(population, successes, draws, observed).expect("valid parameters");
        let want = exact_tail(population, successes, draws, observed);
        hyper_worst = hyper_worst.max((got - want).abs() / want);
    }

    let mut spear_worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(5..=200);
        let x = gaussian(&mut rng, n);
        let y: Vec<f64> = x.iter().zip(gaussian(&mut rng, n)).map(|(a, e)| a + e).collect();
        let got = spearman(&x, &y, Alternative::TwoSided).expect("spearman").rho;
        spear_worst = spear_worst.max((got - rank_oracle_spearman(&x, &y)).abs());
    }

    let (mut ols_worst, mut ridge_worst): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let t = rng.random_range(40..=200);
        let m = rng.random_range(1..=5);
        let x: Vec<Vec<f64>> = (0..m).map(|_| gaussian(&mut rng, t)).collect();
        let noise = gaussian(&mut rng, t);
        let y: Vec<f64> = (0..t).map(|s| 0.5 + x.iter().enumerate().map(|(j, c)| (j as f64 - 1.0) * c[s]).sum::<f64>() + noise[s]).collect();

        let xd = DMatrix::from_fn(t, m + 1, |s, j| if j == 0 { 1.0 } else { x[j - 1][s] });
        let coef = (xd.transpose() * &xd).lu().solve(&(xd.transpose() * DVector::from_vec(y.clone()))).expect("ols");
        let sol = elastic_net_solve(&y, &x, 0.5, 0.0).expect("lambda 0");
        ols_worst = ols_worst.max((sol.intercept - coef[0]).abs());
        for j in 0..m {
            ols_worst = ols_worst.max((sol.betas[j] - coef[j + 1]).abs());
        }

        let lambda = rng.random_range(0.01..1.0);
        let ybar = y.iter().sum::<f64>() / t as f64;
        let xc = DMatrix::from_fn(t, m, |s, j| x[j][s] - x[j].iter().sum::<f64>() / t as f64);
        let yc = DVector::from_iterator(t, y.iter().map(|v| v - ybar));
        let lhs = xc.transpose() * &xc + DMatrix::identity(m, m) * (t as f64 * lambda);
        let b = lhs.lu().solve(&(xc.transpose() * yc)).expect("ridge");
        let sol = elastic_net_solve(&y, &x, 0.0, lambda).expect("a 0");
        for j in 0..m {
            ridge_worst = ridge_worst.max((sol.betas[j] - b[j]).abs());
        }
    }

    let pass = theil_exact == 100 && hyper_worst <= 1e-10 && spear_worst <= 1e-12 && ols_worst <= 1e-6 && ridge_worst <= 1e-8;
    Verdict::new(
        pass,
        format!(
            "theil-sen exact {theil_exact}/100, hypergeometric rel err {hyper_worst:.1e}, spearman err {spear_worst:.1e}, \
             lambda=0 vs OLS {ols_worst:.1e}, a=0 vs ridge {ridge_worst:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- 2

fn sampled_blocks(sizes: &[usize], rho_in: f64, rho_out: f64, t: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let global = gaussian(rng, t);
    let mut rows = Vec::new();
    for &s in sizes {
        let f = gaussian(rng, t);
        for _ in 0..s {
            let e = gaussian(rng, t);
            rows.push(
                (0..t)
                    .map(|k| rho_out.sqrt() * global[k] + (rho_in - rho_out).sqrt() * f[k] + (1.0 - rho_in).sqrt() * e[k])
                    .collect::<Vec<f64>>(),
            );
        }
    }
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| standardize(r).expect("standardize")).collect();
    let labels: Vec<String> = (0..rows.len()).map(|i| format!("S{i}")).collect();
    correlation(&labels, &rows).expect("correlation").values
}

fn to_corr(values: DMatrix<f64>) -> CorrelationMatrix {
    let labels = (0..values.nrows()).map(|i| format!("S{i}")).collect();
    CorrelationMatrix::new(labels, values).expect("correlation matrix")
}

fn criterion_dbht() -> Verdict {
    let mut detail = Vec::new();
    let mut pass = true;
    for blocks in [3usize, 5] {
        let mut recovered = 0;
        let mut invariants = true;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 * blocks as u64 + seed);
            let n = rng.random_range(60..=150);
            // Uneven block sizes with at least 8 members each.
            let mut cuts: Vec<usize> = (0..blocks - 1).map(|_| rng.random_range(8..=n - 8)).collect();
            cuts.sort_unstable();
            let mut sizes = Vec::new();
            let mut prev = 0;
            for c in cuts.into_iter().chain([n]) {
                sizes.push(c.saturating_sub(prev).max(8));
                prev = prev.max(c);
            }
            let truth: Vec<usize> = sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b + 1, s)).collect();
            let values = sampled_blocks(&sizes, 0.55, 0.1, 1000, &mut rng);
            let m = values.nrows();

            let c = cluster_correlation(&to_corr(values.clone())).expect("dbht");
            let again = cluster_correlation(&to_corr(values.clone())).expect("dbht");
            let partition = c.validate().is_ok() && c.labels.len() == m && c.sizes().iter().all(|&s| s > 0);
            let mut perm: Vec<usize> = (0..m).collect();
            perm.shuffle(&mut rng);
            let permuted = cluster_correlation(&to_corr(DMatrix::from_fn(m, m, |i, j| values[(perm[i], perm[j])]))).expect("dbht");
            let pulled: Vec<usize> = perm.iter().map(|&p| c.labels[p]).collect();
            let equivariant = adjusted_rand_index(&permuted.labels, &pulled).expect("ari") > 1.0 - 1e-12;
            invariants &= partition && c == again && equivariant;

            if adjusted_rand_index(&c.labels, &truth).expect("ari") >= 0.9 {
                recovered += 1;
            }
        }
        pass &= recovered >= 18 && invariants;
        detail.push(format!("{blocks}-block ARI>=0.9 in {recovered}/20, invariants {}", if invariants { "hold" } else { "BROKEN" }));
    }
    Verdict::new(pass, detail.join("; "))
}

// ---------------------------------------------------------------- 3

fn criterion_relations() -> Verdict {
    let spec = SynthSpec {
        cluster_sizes: vec![20; 5],
        cluster_memory: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        market_memory: 0.5,
        seed: 3,
        ..SynthSpec::default()
    };
    let (om, _) = omega_of(&spec);
    let profiles: Vec<_> = om.omega.iter().map(|r| memory_profile(r).expect("profile")).collect();
    let e = correlation(&om.tickers, &om.omega).expect("correlation");
    let rows = scatter_rows(&om.tickers, &e, &profiles).expect("scatter");
    let tests = memory_relations(&rows).expect("relations");
    let find = |x: &str, y: &str| tests.iter().find(|t| t.x == x && t.y == y).expect("relation present");
    let beta = find("eta", "beta_vol");
    let lcut = find("eta", "l_cut");
    let pass = beta.p < 0.05 && lcut.p < 0.05 && beta.rho < 0.0 && lcut.rho > 0.0;
    Verdict::new(
        pass,
        format!(
            "eta~beta_vol rho={:.3} p={:.1e} (n={}); eta~l_cut rho={:.3} p={:.1e}",
            beta.rho, beta.p, beta.n, lcut.rho, lcut.p
        ),
    )
}

// ---------------------------------------------------------------- 4

fn fractions_ok(rep: &FiltrationReport) -> bool {
    std::iter::once(&rep.market).chain(&rep.clusters).all(|g| (g.fractions.iter().sum::<f64>() - 1.0).abs() <= 1e-9)
}

fn criterion_filtration() -> Verdict {
    let mut fractions = true;

    let (om, _) = omega_of(&SynthSpec { seed: 11, ..SynthSpec::default() });
    let (_, rep) = run_pipeline(&om);
    fractions &= fractions_ok(&rep);
    let market_ok = rep.market.stages[0].significant && !rep.market.stages[1].significant;
    let market_desc = format!(
        "market-only panel: market stage {}, cluster stage {}",
        if rep.market.stages[0].significant { "significant" } else { "not significant" },
        if rep.market.stages[1].significant { "significant" } else { "not significant" },
    );

    let mut exact = 0;
    for seed in 0..20 {
        let spec = SynthSpec {
            cluster_sizes: vec![10, 10, 20, 20],
            cluster_memory: vec![0.8, 0.8, 0.0, 0.0],
            seed,
            ..SynthSpec::default()
        };
        let (om, truth) = omega_of(&spec);
        let (dec, rep) = run_pipeline(&om);
        fractions &= fractions_ok(&rep);
        let mut picked: Vec<usize> =
            select_cluster_factors(&rep).iter().map(|&k| majority_truth(&dec.clustering, k, &truth)).collect();
        picked.sort_unstable();
        if picked == [1, 2] {
            exact += 1;
        }
    }
    let pass = market_ok && exact >= 16 && fractions;
    Verdict::new(
        pass,
        format!("{market_desc}; two memory clusters selected exactly in {exact}/20 seeds; fractions sum to 1: {fractions}"),
    )
}

// ---------------------------------------------------------------- 5

fn criterion_baselines() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Vec<f64>> = (0..30).map(|_| standardize(&gaussian(&mut rng, 400)).expect("standardize")).collect();
    let labels: Vec<String> = (0..30).map(|i| format!("S{i}")).collect();
    let e = correlation(&labels, &rows).expect("correlation").values;
    let eig = symmetric_eigen(&e).expect("eigen");
    let recon = &eig.vectors * DMatrix::from_diagonal(&DVector::from_vec(eig.values.clone())) * eig.vectors.transpose();
    let pca_err = (&recon - &e).abs().max();

    let (loadings, _, _, _) = principal_axis(&e, 4).expect("principal axis");
    let (rotated, _, _) = varimax(&loadings);
    let comm_err = (0..e.nrows())
        .map(|i| (loadings.row(i).norm_squared() - rotated.row(i).norm_squared()).abs())
        .fold(0.0, f64::max);

    let mut worst_share = [1.0f64; 3];
    let mut pca_le_fa = true;
    let registry = ModelRegistry::default();
    let names = registry.names();
    for seed in 0..5 {
        let spec = SynthSpec { cluster_memory: vec![0.8; 3], loading_jitter: 0.6, seed, ..SynthSpec::default() };
        let (om, _) = omega_of(&spec);
        let (dec, _) = run_pipeline(&om);
        let eps: Vec<Vec<f64>> = dec.stocks.iter().map(|s| s.residual.clone()).collect();
        let baseline: Vec<f64> = om.omega.iter().map(|r| memory_profile(r).expect("profile").eta).collect();
        let input = ModelInput { omega: &om, n_factors: 4, decomposed: Some(&eps) };
        for (m, name) in names.iter().enumerate() {
            let res = registry.get(name).expect("model").residuals(&input).expect("residuals");
            let cdf = residual_memory_cdf(&res, &baseline, &MemoryConfig::default()).expect("cdf");
            worst_share[m] = worst_share[m].min(share_below(&cdf, 0.3));
        }
        let tv = |r: Vec<Vec<f64>>| r.iter().flatten().map(|v| v * v).sum::<f64>();
        pca_le_fa &= tv(PcaModel.residuals(&input).expect("pca")) <= tv(FaModel.residuals(&input).expect("fa"));
    }
    let pass = pca_err <= 1e-8 && comm_err <= 1e-8 && worst_share.iter().all(|&s| s >= 0.9) && pca_le_fa;
    let shares: Vec<String> = names.iter().zip(worst_share).map(|(n, s)| format!("{n} {:.0}%", 100.0 * s)).collect();
    Verdict::new(
        pass,
        format!(
            "E reconstruction {pca_err:.1e}, communality drift {comm_err:.1e}, worst share below 30%: {}, PCA<=FA variance: {pca_le_fa}",
            shares.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 6

fn matched_windows(spec: &SynthSpec, window: usize) -> (Vec<usize>, Vec<usize>) {
    let (om, truth) = omega_of(spec);
    let plan = make_windows(om.n_times(), window, 50).expect("plan");
    let config = RollingConfig { window, ..RollingConfig::default() };
    let fixed = Clustering::from_labels(&truth);
    let res = rolling_pipeline(&om, &plan, &fixed, &config, &SchemeRegistry::default()).expect("rolling");
    let planted: Vec<usize> = (1..=fixed.k).map(|k| truth[fixed.members(k)[0]]).collect();
    (planted, res.records.iter().map(|r| r.windows_matched).collect())
}

fn criterion_rolling() -> Verdict {
    let paper = make_windows(4364, 1600, 50).expect("plan");
    let shift_ok = paper.shift == 56;

    let stationary = SynthSpec { cluster_memory: vec![0.5; 3], seed: 21, ..SynthSpec::default() };
    let (_, stat_counts) = matched_windows(&stationary, 500);
    let stat_ok = stat_counts.iter().all(|&c| c >= 45);

    let regime = SynthSpec { cluster_memory: vec![0.5; 3], cluster_onset: vec![0, 0, 1500], seed: 22, ..SynthSpec::default() };
    let (planted, counts) = matched_windows(&regime, 500);
    let late = counts[planted.iter().position(|&p| p == 3).expect("late cluster")];
    let regime_ok = late.abs_diff(25) <= 5;

    Verdict::new(
        shift_ok && stat_ok && regime_ok,
        format!("shift(4364,1600,50)={}; stationary matches {stat_counts:?} of 50; late-onset cluster matched {late} of 50", paper.shift),
    )
}

// ---------------------------------------------------------------- 7

fn criterion_enrichment() -> Verdict {
    // Desk-scale mirror of the real universe: 1200 stocks, 29 clusters, 19 sectors.
    let (n, k, s) = (1200usize, 29usize, 19usize);
    let clustering = Clustering::from_labels(&(0..n).map(|i| i % k + 1).collect::<Vec<_>>());
    let divisor = bonferroni_divisor(k, s);
    let mut false_runs = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7_000 + seed);
        let sectors: Vec<String> = (0..n).map(|_| format!("Sector{:02}", rng.random_range(0..s))).collect();
        let res = sector_enrichment(&clustering, &sectors, 0.05, divisor).expect("enrichment");
        if res.iter().any(|r| r.significant) {
            false_runs += 1;
        }
    }

    // 20 of 200 stocks form one cluster and one sector.
    let labels: Vec<usize> = (0..200).map(|i| if i < 20 { 1 } else { 2 + i % 4 }).collect();
    let sectors: Vec<String> = (0..200).map(|i| if i < 20 { "Target".to_string() } else { format!("Other{}", i % 7) }).collect();
    let clustering = Clustering::from_labels(&labels);
    let res = sector_enrichment(&clustering, &sectors, 0.05, bonferroni_divisor(clustering.k, 8)).expect("enrichment");
    let target = res.iter().find(|r| r.dominant_sector == "Target").expect("target cluster");
    let enriched_ok = target.significant && target.p < 1e-6;

    Verdict::new(
        false_runs == 0 && enriched_ok,
        format!("random labels: {false_runs}/100 runs with a false positive; planted cluster p={:.1e}", target.p),
    )
}

// ---------------------------------------------------------------- 8

fn run_chain(dir: &Path, manifest: &Path) -> Result<Duration, String> {
    let start = Instant::now();
    for phase in ["synth", "clean", "transform", "decompose", "memory", "filtrate", "enrich", "compare", "rolling", "report"] {
        let out = Command::new(env!("CARGO_BIN_EXE_volfactor"))
            .current_dir(dir)
            .args(["--manifest", manifest.to_str().expect("utf-8 path"), "--out", "out", "--workers", "1", phase])
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{phase}: {}", String::from_utf8_lossy(&out.stderr)));
        }
    }
    Ok(start.elapsed())
}

fn collect_files(root: &Path, rel: &Path, into: &mut BTreeMap<String, Vec<u8>>) {
    for entry in std::fs::read_dir(root.join(rel)).expect("read dir") {
        let entry = entry.expect("dir entry");
        let rel = rel.join(entry.file_name());
        if entry.file_type().expect("file type").is_dir() {
            collect_files(root, &rel, into);
        } else if entry.file_name() != "metadata.json" {
            into.insert(rel.display().to_string(), std::fs::read(root.join(&rel)).expect("read file"));
        }
    }
}

fn criterion_end_to_end() -> Verdict {
    let tmp = tempfile::tempdir().expect("tempdir");
    let manifest = tmp.path().join("run.toml");
    std::fs::write(&manifest, "seed = 8\n").expect("manifest");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    std::fs::create_dir_all(&a).expect("dir");
    std::fs::create_dir_all(&b).expect("dir");
    let (ta, tb) = match (run_chain(&a, &manifest), run_chain(&b, &manifest)) {
        (Ok(ta), Ok(tb)) => (ta, tb),
        (Err(e), _) | (_, Err(e)) => return Verdict::new(false, format!("pipeline failed: {e}")),
    };
    let (mut fa, mut fb) = (BTreeMap::new(), BTreeMap::new());
    collect_files(&a.join("out"), Path::new(""), &mut fa);
    collect_files(&b.join("out"), Path::new(""), &mut fb);
    let identical = fa == fb;
    let within = ta < Duration::from_secs(300) && tb < Duration::from_secs(300);
    Verdict::new(
        identical && within,
        format!(
            "60x3000 chain {:.1}s and {:.1}s; {} artifacts {}",
            ta.as_secs_f64(),
            tb.as_secs_f64(),
            fa.len(),
            if identical { "byte-identical" } else { "DIFFER" }
        ),
    )
}

fn main() {
    // Also reached by `cargo test -- --list` and similar; nothing to list.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    type Check = fn() -> Verdict;
    let criteria: [(&str, Check, Option<u64>); 8] = [
        ("estimator oracles", criterion_estimators, Some(30)),
        ("DBHT recovery", criterion_dbht, Some(120)),
        ("memory-proxy relations", criterion_relations, Some(60)),
        ("filtration correctness", criterion_filtration, Some(300)),
        ("baseline sanity", criterion_baselines, None),
        ("rolling plan and persistence", criterion_rolling, None),
        ("enrichment calibration", criterion_enrichment, None),
        ("end-to-end determinism and budget", criterion_end_to_end, None),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = check();
        let secs = start.elapsed().as_secs_f64();
        let in_budget = budget.is_none_or(|b| secs < b as f64);
        let pass = verdict.pass && in_budget;
        if !pass {
            failed += 1;
        }
        let limit = budget.map(|b| format!(" < {b}s")).unwrap_or_default();
        println!(
            "{} criterion {}: {name} — {} [{secs:.1}s{limit}]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            verdict.detail
        );
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 && std::env::var_os("VOLFACTOR_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
