//! On-disk phase artifacts under the output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::manifest::RunManifest;

/// A phase was run before one it depends on.
#[derive(Debug, thiserror::Error)]
#[error("`{phase}` needs the output of `{requires}`; run `volfactor {requires}` first (missing {missing})")]
pub struct MissingPhase {
    pub phase: &'static str,
    pub requires: &'static str,
    pub missing: String,
}

pub struct Store {
    root: PathBuf,
    phase: &'static str,
}

impl Store {
    pub fn open(root: &Path, phase: &'static str, manifest: &RunManifest) -> anyhow::Result<Self> {
        let store = Store { root: root.to_path_buf(), phase };
        fs::create_dir_all(store.dir(phase)).with_context(|| format!("creating {}", store.dir(phase).display()))?;
        fs::write(store.dir(phase).join("manifest.toml"), manifest.to_toml()?)?;
        Ok(store)
    }

    pub fn dir(&self, phase: &str) -> PathBuf {
        self.root.join(phase)
    }

    /// Path of an artifact this phase writes.
    pub fn output(&self, name: &str) -> PathBuf {
        self.dir(self.phase).join(name)
    }

    /// Path of an artifact written by `requires`, which must exist.
    pub fn input(&self, requires: &'static str, name: &str) -> Result<PathBuf, MissingPhase> {
        let path = self.dir(requires).join(name);
        if path.is_file() {
            Ok(path)
        } else {
            Err(MissingPhase { phase: self.phase, requires, missing: path.display().to_string() })
        }
    }

    pub fn has(&self, phase: &str, name: &str) -> bool {
        self.dir(phase).join(name).is_file()
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.output(name), text)?;
        Ok(())
    }

    pub fn read_json<T: DeserializeOwned>(&self, requires: &'static str, name: &str) -> anyhow::Result<T> {
        let path = self.input(requires, name)?;
        let text = fs::read_to_string(&path)?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// One row per series: `ticker,v_0,v_1,...`.
    pub fn write_rows(&self, name: &str, tickers: &[String], rows: &[Vec<f64>]) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(self.output(name))?;
        for (t, row) in tickers.iter().zip(rows) {
            let mut rec = Vec::with_capacity(row.len() + 1);
            rec.push(t.clone());
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_rows(&self, requires: &'static str, name: &str) -> anyhow::Result<(Vec<String>, Vec<Vec<f64>>)> {
        let path = self.input(requires, name)?;
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(&path)?;
        let mut tickers = Vec::new();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            tickers.push(rec[0].to_string());
            let row = rec.iter().skip(1).map(str::parse).collect::<Result<Vec<f64>, _>>()
                .with_context(|| format!("{}: bad number in row {}", path.display(), tickers.len()))?;
            rows.push(row);
        }
        Ok((tickers, rows))
    }

    /// Delimited table with a header row.
    pub fn write_table<S: Serialize>(&self, name: &str, rows: &[S]) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(self.output(name))?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Start/finish times per phase, kept apart from every other artifact so
/// reruns can be compared byte for byte.
pub fn stamp(root: &Path, phase: &str, event: &str) -> anyhow::Result<()> {
    let path = root.join("metadata.json");
    let mut meta: BTreeMap<String, BTreeMap<String, String>> = match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
        Err(_) => BTreeMap::new(),
    };
    meta.entry(phase.to_string()).or_default().insert(event.to_string(), chrono::Utc::now().to_rfc3339());
    fs::create_dir_all(root)?;
    fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}
