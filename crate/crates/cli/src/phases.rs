//! One function per subcommand. Each reads earlier artifacts through the
//! store and writes its own under `<out>/<phase>/`.

use std::path::PathBuf;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use volfactor::benchmark::{residual_memory_cdf, share_below, fraction_at_share, ModelInput, ModelRegistry};
use volfactor::dbht::Clustering;
use volfactor::memory::memory_profile_with;
use volfactor::panel_io::{clean_panel, load_panel, load_prices, save_panel};
use volfactor::pipeline::{
    bonferroni_divisor, decompose, load_sectors, log_abs_transform, log_returns, memory_filtration, memory_relations,
    scatter_rows, sector_enrichment, sector_labels, select_cluster_factors, EnrichmentResult, FiltrationReport,
    LogVolPanel, PipelineConfig, StageSeries, StockDecomposition,
};
use volfactor::rolling::{make_windows, rolling_pipeline, RollingConfig};
use volfactor::stats::correlation;
use volfactor::synth::generate_panel;
use volfactor::weights::SchemeRegistry;

use crate::manifest::RunManifest;
use crate::store::Store;

#[derive(Debug, Serialize, Deserialize)]
struct ClusteringFile {
    tickers: Vec<String>,
    labels: Vec<usize>,
    k: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct FloorCount {
    ticker: String,
    floor_count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SectorRow {
    ticker: String,
    sector: String,
}

pub fn synth(m: &RunManifest, store: &Store) -> anyhow::Result<()> {
    let spec = volfactor::synth::SynthSpec { seed: m.seed, ..m.synth.clone() };
    let generated = generate_panel(&spec)?;
    save_panel(&generated.panel, store.output("prices.csv"))?;
    store.write_json("truth.json", &generated.truth)?;
    // Planted clusters double as sectors, with every fifth member of a
    // cluster filed under the next one so enrichment is not trivially exact.
    let k = spec.n_clusters();
    let mut seen = vec![0usize; k + 1];
    let sectors: Vec<SectorRow> = generated
        .truth
        .tickers
        .iter()
        .zip(&generated.truth.membership)
        .map(|(t, &c)| {
            seen[c] += 1;
            let s = if seen[c] % 5 == 0 { c % k + 1 } else { c };
            SectorRow { ticker: t.clone(), sector: format!("Sector{s:02}") }
        })
        .collect();
    store.write_table("sectors.csv", &sectors)
}

pub fn clean(m: &RunManifest, store: &Store) -> anyhow::Result<()> {
    let input = match &m.input {
        Some(p) => p.clone(),
        None => store.input("synth", "prices.csv")?,
    };
    let raw = load_prices(&input).with_context(|| format!("loading {}", input.display()))?;
    let cleaned = clean_panel(&raw, m.clean_p)?;
    save_panel(&cleaned.panel, store.output("panel.csv"))?;
    store.write_json("panel.json", &cleaned.sidecar())
}

pub fn transform(_m: &RunManifest, store: &Store) -> anyhow::Result<()> {
    let panel = load_panel(store.input("clean", "panel.csv")?)?;
    let omega = log_abs_transform(&log_returns(&panel)?)?;
    store.write_rows("omega.csv", &omega.tickers, &omega.omega)?;
    let floors: Vec<FloorCount> = omega
        .tickers
        .iter()
        .zip(&omega.floor_count)
        .map(|(t, &c)| FloorCount { ticker: t.clone(), floor_count: c })
        .collect();
    store.write_table("floor_counts.csv", &floors)
}

fn load_omega(store: &Store) -> anyhow::Result<LogVolPanel> {
    let (tickers, omega) = store.read_rows("transform", "omega.csv")?;
    let path = store.input("transform", "floor_counts.csv")?;
    let floor_count = csv::Reader::from_path(path)?
        .deserialize::<FloorCount>()
        .map(|r| r.map(|f| f.floor_count))
        .collect::<Result<Vec<_>, _>>()?;
    anyhow::ensure!(floor_count.len() == tickers.len(), "transform artifacts disagree on the number of stocks");
    Ok(LogVolPanel { tickers, omega, floor_count })
}

fn load_clustering(store: &Store) -> anyhow::Result<(Vec<String>, Clustering)> {
    let file: ClusteringFile = store.read_json("decompose", "clustering.json")?;
    let c = Clustering { labels: file.labels, k: file.k };
    c.validate()?;
    Ok((file.tickers, c))
}

pub fn decompose_phase(m: &RunManifest, store: &Store) -> anyhow::Result<()> {
    let omega = load_omega(store)?;
    let config = PipelineConfig { scheme: m.scheme.clone(), enet: m.enet.clone() };
    let dec = decompose(&omega, &config, &SchemeRegistry::default())?;
    store.write_json(
        "clustering.json",
        &ClusteringFile { tickers: dec.tickers.clone(), labels: dec.clustering.labels.clone(), k: dec.clustering.k },
    )?;
    #[derive(Serialize)]
    struct Market<'a> {
        weights: &'a [f64],
        fits: &'a [volfactor::regression::OlsFit],
        residual_scale: &'a [f64],
    }
    store.write_json(
        "market.json",
        &Market { weights: &dec.market.weights.weights, fits: &dec.market_fits, residual_scale: &dec.residual_scale },
    )?;
    store.write_json("stocks.json", &dec.stocks)?;
    let mode_names: Vec<String> =
        std::iter::once("market".to_string()).chain((1..=dec.modes.len()).map(|k| format!("cluster_{k}"))).collect();
    let mode_values: Vec<Vec<f64>> =
        std::iter::once(&dec.market).chain(&dec.modes).map(|md| md.values.clone()).collect();
    store.write_rows("modes.csv", &mode_names, &mode_values)?;
    store.write_rows("market_removed.csv", &dec.tickers, &dec.residuals)?;
    let cm: Vec<Vec<f64>> = dec.stocks.iter().map(|s| s.cluster_removed.clone()).collect();
    store.write_rows("cluster_removed.csv", &dec.tickers, &cm)?;
    let eps: Vec<Vec<f64>> = dec.stocks.iter().map(|s| s.residual.clone()).collect();
    store.write_rows("residual.csv", &dec.tickers, &eps)
}

#[derive(Debug, Serialize)]
struct ProfileRow<'a> {
    ticker: &'a str,
    l_cut: usize,
    truncated: bool,
    beta_vol: Option<f64>,
    eta: f64,
}

pub fn memory(m: &RunManifest, store: &Store) -> anyhow::Result<()> {
    use rayon::prelude::*;
    let omega = load_omega(store)?;
    let profiles = omega
        .omega
        .par_iter()
        .map(|row| memory_profile_with(row, &m.memory))
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<ProfileRow> = omega
        .tickers
        .iter()
        .zip(&profiles)
        .map(|(t, p)| ProfileRow { ticker: t, l_cut: p.l_cut, truncated: p.truncated, beta_vol: p.beta_vol, eta: p.eta })
        .collect();
    store.write_table("profiles.csv", &rows)?;
    let acfs: Vec<Vec<f64>> = profiles.iter().map(|p| p.acf.clone()).collect();
    store.write_rows("acf.csv", &omega.tickers, &acfs)?;
    let e = correlation(&omega.tickers, &omega.omega)?;
    let scatter = scatter_rows(&omega.tickers, &e, &profiles)?;
    store.write_table("scatter.csv", &scatter)?;
    store.write_json("relations.json", &memory_relations(&scatter)?)
}

fn stage_rows(store: &Store) -> anyhow::Result<[Vec<Vec<f64>>; 3]> {
    Ok([
        store.read_rows("decompose", "market_removed.csv")?.1,
        store.read_rows("decompose", "cluster_removed.csv")?.1,
        store.read_rows("decompose", "residual.csv")?.1,
    ])
}

pub fn filtrate(m: &RunManifest, store: &Store) -> anyhow::Result<()> {
    let (tickers, clustering) = load_clustering(store)?;
    let omega = load_omega(store)?;
    anyhow::ensure!(omega.tickers == tickers, "transform and decompose outputs cover different stocks");
    let [c, cm, eps] = stage_rows(store)?;
    let series: Vec<StageSeries> = (0..tickers.len())
        .map(|i| StageSeries {
            plain: &omega.omega[i],
            market_removed: &c[i],
            cluster_removed: &cm[i],
            residual: &eps[i],
        })
        .collect();
    let report = memory_filtration(&tickers, &clustering, &series, &m.memory)?;
    store.write_json("report.json", &report)?;
    store.write_json("selected.json", &select_cluster_factors(&report))
}

fn sectors_path(m: &RunManifest, store: &Store) -> anyhow::Result<PathBuf> {
    Ok(match &m.sectors {
        Some(p) => p.clone(),
        None => store.input("synth", "sectors.csv")?,
    })
}

pub fn enrich(m: &RunManifest, store: &Store) -> anyhow::Result<()> {
    let (tickers, clustering) = load_clustering(store)?;
    let table = load_sectors(sectors_path(m, store)?)?;
    let labels = sector_labels(&tickers, &table)?;
    let mut distinct = labels.clone();
    distinct.sort();
    distinct.dedup();
    let divisor = m.bonferroni_divisor.unwrap_or_else(|| bonferroni_divisor(clustering.k, distinct.len()).max(1.0));
    let results = sector_enrichment(&clustering, &labels, m.alpha, divisor)?;
    store.write_table("enrichment.csv", &results)?;
    store.write_json("enrichment.json", &results)
}

#[derive(Debug, Serialize)]
struct CdfRow<'a> {
    fraction: f64,
    cumulative_share: f64,
    model: &'a str,
}

#[derive(Debug, Serialize)]
struct ModelSummary {
    model: String,
    stocks: usize,
    /// Residual fraction reached by 90% of stocks.
    fraction_at_90: Option<f64>,
    share_below_30: f64,
    residual_sum_of_squares: f64,
}

pub fn compare(m: &RunManifest, store: &Store) -> anyhow::Result<()> {
    let omega = load_omega(store)?;
    let (_, eps) = store.read_rows("decompose", "residual.csv")?;
    let selected: Vec<usize> = store.read_json("filtrate", "selected.json")?;
    let n_factors = m.n_factors.unwrap_or(selected.len() + 1);
    let baseline: Vec<f64> = {
        use rayon::prelude::*;
        omega
            .omega
            .par_iter()
            .map(|r| memory_profile_with(r, &m.memory).map(|p| p.eta))
            .collect::<Result<_, _>>()?
    };
    let registry = ModelRegistry::default();
    let input = ModelInput { omega: &omega, n_factors, decomposed: Some(&eps) };
    let mut cdf_rows = Vec::new();
    let mut summary = Vec::new();
    let names = registry.names();
    for name in &names {
        let res = registry.get(name)?.residuals(&input).with_context(|| format!("model {name}"))?;
        let cdf = residual_memory_cdf(&res, &baseline, &m.memory)?;
        summary.push(ModelSummary {
            model: name.to_string(),
            stocks: cdf.len(),
            fraction_at_90: fraction_at_share(&cdf, 0.9),
            share_below_30: share_below(&cdf, 0.3),
            residual_sum_of_squares: res.iter().flatten().map(|v| v * v).sum(),
        });
        cdf_rows.extend(cdf.into_iter().map(|p| (p, *name)));
    }
    let rows: Vec<CdfRow> =
        cdf_rows.iter().map(|(p, name)| CdfRow { fraction: p.fraction, cumulative_share: p.share, model: name }).collect();
    store.write_table("cdf.csv", &rows)?;
    #[derive(Serialize)]
    struct Summary {
        n_factors: usize,
        models: Vec<ModelSummary>,
    }
    store.write_json("summary.json", &Summary { n_factors, models: summary })
}

pub fn rolling(m: &RunManifest, store: &Store) -> anyhow::Result<()> {
    let omega = load_omega(store)?;
    let (tickers, fixed) = load_clustering(store)?;
    anyhow::ensure!(omega.tickers == tickers, "transform and decompose outputs cover different stocks");
    let plan = make_windows(omega.n_times(), m.rolling.window, m.rolling.n_windows)?;
    let config = RollingConfig {
        window: m.rolling.window,
        n_windows: m.rolling.n_windows,
        scheme: m.scheme.clone(),
        alpha: m.rolling.alpha,
        enet: volfactor::pipeline::EnetConfig { n_perm: m.rolling.n_perm, ..m.enet.clone() },
        memory: m.memory,
    };
    let result = rolling_pipeline(&omega, &plan, &fixed, &config, &SchemeRegistry::default())?;
    #[derive(Serialize)]
    struct Bar {
        cluster_id: usize,
        windows_matched: usize,
        windows_memory_significant: usize,
    }
    let bars: Vec<Bar> = result
        .records
        .iter()
        .map(|r| Bar {
            cluster_id: r.cluster,
            windows_matched: r.windows_matched,
            windows_memory_significant: r.windows_memory_significant,
        })
        .collect();
    store.write_table("persistence.csv", &bars)?;
    store.write_json("windows.json", &result)
}

#[derive(Debug, Serialize)]
struct ClusterRow {
    k: usize,
    size: usize,
    dominant_sector: String,
    p: f64,
    sector_sig: bool,
    cluster_sig: bool,
    market: f64,
    cluster: f64,
    interac: f64,
    resid: f64,
}

pub fn report(_m: &RunManifest, store: &Store) -> anyhow::Result<()> {
    let filtration: FiltrationReport = store.read_json("filtrate", "report.json")?;
    let enrichment: Vec<EnrichmentResult> = store.read_json("enrich", "enrichment.json")?;
    let stocks: Vec<StockDecomposition> = store.read_json("decompose", "stocks.json")?;
    let mut table = Vec::new();
    for e in &enrichment {
        let g = filtration.cluster(e.cluster).with_context(|| format!("cluster {} missing from filtration", e.cluster))?;
        let [market, cluster, interac, resid] = g.fractions;
        table.push(ClusterRow {
            k: e.cluster,
            size: e.size,
            dominant_sector: e.dominant_sector.clone(),
            p: e.p,
            sector_sig: e.significant,
            cluster_sig: g.stages[1].significant,
            market,
            cluster,
            interac,
            resid,
        });
    }
    store.write_table("clusters.csv", &table)?;

    let mut figures = Vec::new();
    for (phase, name) in [
        ("memory", "scatter.csv"),
        ("memory", "relations.json"),
        ("compare", "cdf.csv"),
        ("rolling", "persistence.csv"),
    ] {
        if store.has(phase, name) {
            let target = format!("{phase}_{name}");
            std::fs::copy(store.dir(phase).join(name), store.output(&target))?;
            figures.push(target);
        }
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        n_stocks: usize,
        n_clusters: usize,
        selected_clusters: Vec<usize>,
        market_fractions: [f64; 4],
        market_stage_significant: bool,
        mean_abs_own_beta: f64,
        figure_data: &'a [String],
    }
    let own: f64 = stocks.iter().map(|s| s.own_beta.abs()).sum::<f64>() / stocks.len().max(1) as f64;
    store.write_json(
        "summary.json",
        &Summary {
            n_stocks: filtration.stocks.len(),
            n_clusters: filtration.clusters.len(),
            selected_clusters: select_cluster_factors(&filtration),
            market_fractions: filtration.market.fractions,
            market_stage_significant: filtration.market.stages[0].significant,
            mean_abs_own_beta: own,
            figure_data: &figures,
        },
    )
}
