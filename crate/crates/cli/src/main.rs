//! `volfactor`: batch command line for the log-volatility factor pipeline.
//!
//! Every subcommand is one phase. Phases read the artifacts of earlier
//! phases from the output directory and write their own into
//! `<out>/<phase>/`, together with a copy of the resolved manifest.

mod manifest;
mod phases;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use manifest::RunManifest;
use store::{stamp, MissingPhase, Store};

#[derive(Debug, Parser)]
#[command(name = "volfactor", version, about = "Cluster-driven log-volatility factor model")]
struct Cli {
    /// TOML run manifest; defaults are used for anything it leaves out.
    #[arg(long, global = true, env = "VOLFACTOR_MANIFEST")]
    manifest: Option<PathBuf>,
    /// Output directory (overrides the manifest).
    #[arg(long, global = true, env = "VOLFACTOR_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (overrides the manifest).
    #[arg(long, global = true, env = "VOLFACTOR_WORKERS")]
    workers: Option<usize>,
    /// Random seed (overrides the manifest).
    #[arg(long, global = true, env = "VOLFACTOR_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Align raw prices to a common calendar.
    Clean,
    /// Standardized log-returns to standardized log-volatilities.
    Transform,
    /// Market mode, clustering, cluster modes and per-stock regressions.
    Decompose,
    /// Memory profile of every plain log-volatility series.
    Memory,
    /// Four-stage memory filtration and cluster factor selection.
    Filtrate,
    /// Sector over-representation of each cluster.
    Enrich,
    /// Residual memory of the PCA and factor-analysis baselines.
    Compare,
    /// Cluster persistence across rolling windows.
    Rolling,
    /// Generate a synthetic price panel with planted structure.
    Synth,
    /// Cluster summary table and figure data.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Clean => "clean",
            Command::Transform => "transform",
            Command::Decompose => "decompose",
            Command::Memory => "memory",
            Command::Filtrate => "filtrate",
            Command::Enrich => "enrich",
            Command::Compare => "compare",
            Command::Rolling => "rolling",
            Command::Synth => "synth",
            Command::Report => "report",
        }
    }
}

fn resolve(cli: &Cli) -> anyhow::Result<RunManifest> {
    let mut m = match &cli.manifest {
        Some(path) => RunManifest::load(path)?,
        None => RunManifest::default(),
    };
    if let Some(out) = &cli.out {
        m.out = out.clone();
    }
    if cli.workers.is_some() {
        m.workers = cli.workers;
    }
    if let Some(seed) = cli.seed {
        m.seed = seed;
    }
    m.validate()?;
    Ok(m)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let m = resolve(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = m.workers {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let phase = cli.command.name();
    let store = Store::open(&m.out, phase, &m)?;
    stamp(&m.out, phase, "started")?;
    pool.install(|| match cli.command {
        Command::Clean => phases::clean(&m, &store),
        Command::Transform => phases::transform(&m, &store),
        Command::Decompose => phases::decompose_phase(&m, &store),
        Command::Memory => phases::memory(&m, &store),
        Command::Filtrate => phases::filtrate(&m, &store),
        Command::Enrich => phases::enrich(&m, &store),
        Command::Compare => phases::compare(&m, &store),
        Command::Rolling => phases::rolling(&m, &store),
        Command::Synth => phases::synth(&m, &store),
        Command::Report => phases::report(&m, &store),
    })?;
    stamp(&m.out, phase, "finished")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = match err.downcast_ref::<MissingPhase>() {
                Some(mp) => json!({
                    "error": "missing_phase",
                    "phase": mp.phase,
                    "requires": mp.requires,
                    "message": err.to_string(),
                }),
                None => json!({
                    "error": "failed",
                    "phase": cli.command.name(),
                    "message": format!("{err:#}"),
                }),
            };
            eprintln!("{record}");
            ExitCode::from(if err.is::<MissingPhase>() { 2 } else { 1 })
        }
    }
}
