//! Run manifest: every parameter that influences an output file.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use volfactor::memory::MemoryConfig;
use volfactor::panel_io::DEFAULT_CLEAN_P;
use volfactor::pipeline::EnetConfig;
use volfactor::synth::SynthSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunManifest {
    /// `ticker,date,close` file; falls back to the `synth` output.
    pub input: Option<PathBuf>,
    /// `ticker,sector` file; falls back to the `synth` output.
    pub sectors: Option<PathBuf>,
    pub out: PathBuf,
    pub scheme: String,
    pub clean_p: f64,
    pub alpha: f64,
    /// Defaults to `0.5 * clusters * sectors`.
    pub bonferroni_divisor: Option<f64>,
    /// Factors kept by the baselines; defaults to selected clusters + 1.
    pub n_factors: Option<usize>,
    pub seed: u64,
    /// Defaults to the number of available cores.
    pub workers: Option<usize>,
    pub enet: EnetConfig,
    pub memory: MemoryConfig,
    pub rolling: RollingSection,
    pub synth: SynthSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RollingSection {
    pub window: usize,
    pub n_windows: usize,
    pub alpha: f64,
    /// Permutation tests are skipped inside windows unless set.
    pub n_perm: usize,
}

impl Default for RollingSection {
    fn default() -> Self {
        RollingSection { window: 1600, n_windows: 50, alpha: 0.05, n_perm: 0 }
    }
}

impl Default for RunManifest {
    fn default() -> Self {
        RunManifest {
            input: None,
            sectors: None,
            out: PathBuf::from("out"),
            scheme: "eigen".into(),
            clean_p: DEFAULT_CLEAN_P,
            alpha: 0.05,
            bonferroni_divisor: None,
            n_factors: None,
            seed: 0,
            workers: None,
            enet: EnetConfig::default(),
            memory: MemoryConfig::default(),
            rolling: RollingSection::default(),
            synth: SynthSpec::default(),
        }
    }
}

impl RunManifest {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(self.clean_p > 0.0 && self.clean_p <= 1.0, "clean_p must lie in (0, 1]");
        anyhow::ensure!(self.alpha > 0.0 && self.alpha < 1.0, "alpha must lie in (0, 1)");
        anyhow::ensure!(self.rolling.alpha > 0.0 && self.rolling.alpha < 1.0, "rolling.alpha must lie in (0, 1)");
        anyhow::ensure!(self.workers != Some(0), "workers must be at least 1");
        if let Some(d) = self.bonferroni_divisor {
            anyhow::ensure!(d >= 1.0, "bonferroni_divisor must be at least 1");
        }
        self.synth.validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let m = RunManifest { seed: 7, n_factors: Some(4), ..RunManifest::default() };
        let back: RunManifest = toml::from_str(&m.to_toml().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn partial_manifest_uses_defaults() {
        let m: RunManifest = toml::from_str("seed = 3\n[rolling]\nwindow = 500\n").unwrap();
        assert_eq!(m.seed, 3);
        assert_eq!(m.rolling.window, 500);
        assert_eq!(m.rolling.n_windows, 50);
        assert_eq!(m.scheme, "eigen");
        assert!(toml::from_str::<RunManifest>("sede = 3").is_err());
    }
}
