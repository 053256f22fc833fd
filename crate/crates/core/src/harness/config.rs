use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::soliton::SolitonParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Single,
    TwoSoliton,
    CriterionSweep,
    Spectrum,
    FreeCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub l_dom: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Steps between checkpoints.
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
}

fn default_sample_every() -> usize {
    200
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveConfig {
    pub omega: f64,
    pub c: f64,
    pub x: f64,
    #[serde(default)]
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub sigmas: Vec<f64>,
    /// Values of `c/√ω`.
    #[serde(default)]
    pub ratios: Vec<f64>,
    #[serde(default = "default_omega")]
    pub omega: f64,
}

fn default_omega() -> f64 {
    1.0
}

/// One experiment, read from TOML. Physical parameters have no defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub time: Option<TimeConfig>,
    #[serde(default)]
    pub waves: Vec<WaveConfig>,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
    /// Run two-soliton configurations that fail the feasibility check.
    #[serde(default)]
    pub force: bool,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    /// Number of lowest eigenvalues kept by the spectrum scenario.
    #[serde(default)]
    pub eigen_count: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(skip)]
    source: String,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.source = text.to_string();
        cfg.validate()?;
        Ok(cfg)
    }

    /// A criterion-sweep config built in code.
    pub fn sweep(sweep: SweepConfig) -> Self {
        Self {
            scenario: Scenario::CriterionSweep,
            sigma: None,
            grid: None,
            time: None,
            waves: Vec::new(),
            delta: 0.0,
            seed: 0,
            force: false,
            sweep: Some(sweep),
            eigen_count: None,
            output: None,
            source: String::new(),
        }
    }

    /// Copy with another seed; the manifest hash follows the new content.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            source: String::new(),
            ..self.clone()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Re-serialized form, used when a config is built in code.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Bytes the manifest hash is taken over.
    pub fn source(&self) -> Result<String> {
        if self.source.is_empty() {
            self.to_toml()
        } else {
            Ok(self.source.clone())
        }
    }

    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(self.source()?.as_bytes()))
    }

    fn validate(&self) -> Result<()> {
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "scenario {:?} requires {what}",
                    self.scenario
                )))
            }
        };
        match self.scenario {
            Scenario::Single | Scenario::TwoSoliton => {
                need(self.sigma.is_some(), "sigma")?;
                need(self.grid.is_some(), "[grid]")?;
                need(self.time.is_some(), "[time]")?;
                let k = if self.scenario == Scenario::Single { 1 } else { 2 };
                need(self.waves.len() == k, &format!("{k} [[waves]] entries"))?;
                if !(self.delta >= 0.0) {
                    return Err(Error::Config(format!("delta = {} must be >= 0", self.delta)));
                }
            }
            Scenario::CriterionSweep => need(self.sweep.is_some(), "[sweep]")?,
            Scenario::Spectrum => {
                need(self.sigma.is_some(), "sigma")?;
                need(self.grid.is_some(), "[grid]")?;
                need(!self.waves.is_empty(), "[[waves]]")?;
            }
            Scenario::FreeCheck => {
                need(self.grid.is_some(), "[grid]")?;
                need(self.time.is_some(), "[time]")?;
            }
        }
        Ok(())
    }

    pub fn sigma(&self) -> Result<f64> {
        self.sigma.ok_or_else(|| Error::Config("missing sigma".into()))
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = self.grid.ok_or_else(|| Error::Config("missing [grid]".into()))?;
        Grid::new(g.n, g.l_dom)
    }

    pub fn time(&self) -> Result<TimeConfig> {
        self.time.ok_or_else(|| Error::Config("missing [time]".into()))
    }

    pub fn wave_params(&self) -> Result<Vec<SolitonParams>> {
        let sigma = self.sigma()?;
        self.waves
            .iter()
            .map(|w| SolitonParams::new(sigma, w.omega, w.c))
            .collect()
    }

    /// Packed modulation vector `(ω.., c.., x.., γ..)` of the initial waves.
    pub fn initial_q(&self) -> Vec<f64> {
        let w = &self.waves;
        w.iter()
            .map(|v| v.omega)
            .chain(w.iter().map(|v| v.c))
            .chain(w.iter().map(|v| v.x))
            .chain(w.iter().map(|v| v.gamma))
            .collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
