//! Configuration, experiment orchestration and persisted artifacts.

pub mod calibration;
pub mod config;
pub mod io;
pub mod run;
pub mod sweep;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use calibration::Calibration;
pub use config::{ExperimentConfig, Scenario};
pub use run::{
    perturbation, run_free_check, run_single_soliton, run_spectrum, run_two_soliton_experiment,
    run_waves, EvolvedRun, FreeCheck, RunReport, RunStatus, WaveSpectrum,
};
pub use sweep::{run_criterion_sweep, SweepRow};

use crate::error::{Error, Result};
use crate::functionals::AuditBounds;
use config::sha256_hex;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone)]
pub enum Outcome {
    Waves(Box<EvolvedRun>),
    Sweep(Vec<SweepRow>),
    Spectrum(Vec<WaveSpectrum>),
    Free(FreeCheck),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub scenario: Scenario,
    pub version: String,
    /// File name to SHA-256 of its bytes.
    pub files: BTreeMap<String, String>,
}

/// A finished experiment together with its configuration.
#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub config: ExperimentConfig,
    pub outcome: Outcome,
}

impl RunArtifact {
    /// Run the configured scenario. Two-soliton runs are audited against
    /// `bounds` when given.
    pub fn run(config: ExperimentConfig, bounds: Option<&AuditBounds>) -> Result<Self> {
        let outcome = match config.scenario {
            Scenario::Single => Outcome::Waves(Box::new(run_single_soliton(&config)?)),
            Scenario::TwoSoliton => {
                Outcome::Waves(Box::new(run_two_soliton_experiment(&config, bounds)?))
            }
            Scenario::CriterionSweep => Outcome::Sweep(run_criterion_sweep(&config)?),
            Scenario::Spectrum => Outcome::Spectrum(run_spectrum(&config)?),
            Scenario::FreeCheck => Outcome::Free(run_free_check(&config)?),
        };
        Ok(Self { config, outcome })
    }

    pub fn report_json(&self) -> Result<serde_json::Value> {
        Ok(match &self.outcome {
            Outcome::Waves(r) => serde_json::to_value(&r.report)?,
            Outcome::Sweep(rows) => serde_json::to_value(rows)?,
            Outcome::Spectrum(s) => serde_json::to_value(s)?,
            Outcome::Free(f) => serde_json::to_value(f)?,
        })
    }

    pub fn status(&self) -> RunStatus {
        match &self.outcome {
            Outcome::Waves(r) => r.report.status,
            _ => RunStatus::Ok,
        }
    }

    /// Write config, report, CSVs and snapshots to `dir`, then the manifest.
    pub fn write(&self, dir: &Path) -> Result<Manifest> {
        std::fs::create_dir_all(dir)?;
        let mut names = vec!["config.toml", "report.json"];
        std::fs::write(dir.join("config.toml"), self.config.source()?)?;
        io::write_json(&dir.join("report.json"), &self.report_json()?)?;
        match &self.outcome {
            Outcome::Waves(r) => {
                let sigma = r.report.sigma;
                io::write_trace_csv(&dir.join("trace.csv"), &r.trace)?;
                io::write_params_csv(&dir.join("params.csv"), r.k, &r.records)?;
                io::write_snapshot(&dir.join("u0.bin"), &r.initial, sigma)?;
                io::write_snapshot(&dir.join("u_final.bin"), &r.final_field, sigma)?;
                names.extend(["trace.csv", "params.csv", "u0.bin", "u_final.bin"]);
                if r.monotonicity.is_some() {
                    io::write_functionals_csv(&dir.join("functionals.csv"), &r.functionals)?;
                    names.push("functionals.csv");
                }
                if let Some(a) = &r.report.audit {
                    io::write_json(&dir.join("audit.json"), a)?;
                    names.push("audit.json");
                }
            }
            Outcome::Sweep(rows) => {
                sweep::write_sweep_csv(&dir.join("sweep.csv"), rows)?;
                names.push("sweep.csv");
            }
            Outcome::Spectrum(_) | Outcome::Free(_) => {}
        }
        let mut files = BTreeMap::new();
        for n in names {
            files.insert(n.to_string(), sha256_hex(&std::fs::read(dir.join(n))?));
        }
        let manifest = Manifest {
            config_hash: self.config.hash()?,
            scenario: self.config.scenario,
            version: env!("CARGO_PKG_VERSION").to_string(),
            files,
        };
        io::write_json(&dir.join(MANIFEST), &manifest)?;
        Ok(manifest)
    }
}

/// Re-hash every file listed in `dir/manifest.json`.
pub fn verify_manifest(dir: &Path) -> Result<Manifest> {
    let m: Manifest = serde_json::from_slice(&std::fs::read(dir.join(MANIFEST))?)?;
    let cfg = ExperimentConfig::load(&dir.join("config.toml"))?;
    if cfg.hash()? != m.config_hash {
        return Err(Error::Format("config hash does not match the manifest".into()));
    }
    for (name, hash) in &m.files {
        if sha256_hex(&std::fs::read(dir.join(name))?) != *hash {
            return Err(Error::Format(format!("{name}: hash mismatch")));
        }
    }
    Ok(m)
}

/// Process exit code for an error: 2 infeasible or invalid configuration,
/// 3 numeric failure, 4 blow-up, 5 tube exit, 1 anything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible(_) | Error::Config(_) => 2,
        Error::BlowUp { .. } => 4,
        Error::Decomposition { .. } | Error::NearDegenerate(_) => 5,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Format(_) => 1,
        _ => 3,
    }
}

pub fn status_code(s: RunStatus) -> i32 {
    match s {
        RunStatus::Ok => 0,
        RunStatus::BlowUp => 4,
        RunStatus::TubeExit => 5,
    }
}
