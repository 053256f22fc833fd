//! Regression constants measured once on the pinned reference runs and
//! frozen in `fixtures/calibration.json`.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::EvolvedRun;
use crate::error::{Error, Result};
use crate::functionals::{calibrate_bounds, AuditBounds, AuditSample};

pub const SAFETY: f64 = 5.0;
/// Relative level below which functional increments count as rounding.
pub const NOISE_FLOOR: f64 = 1e-12;

const REFERENCE_CLEAN: &str = include_str!("../../fixtures/reference_delta0.toml");
const REFERENCE_PERTURBED: &str = include_str!("../../fixtures/reference_delta1e-3.toml");
const CALIBRATION: &str = include_str!("../../fixtures/calibration.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRun {
    pub delta: f64,
    pub seed: u64,
    pub sup_h1_eps: f64,
    pub max_param_drift: f64,
    pub drift_shape: f64,
}

/// Raw fitted constants; limits apply [`SAFETY`] on use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub safety: f64,
    pub runs: Vec<ReferenceRun>,
    /// `max sup‖ε‖_{H¹} / (δ + e^{−θ₀L/2})`
    pub eps_constant: f64,
    /// `max drift / drift_shape`
    pub drift_constant: f64,
    pub audit: AuditBounds,
}

impl Calibration {
    pub fn fixture() -> Result<Self> {
        serde_json::from_str(CALIBRATION).map_err(Error::from)
    }

    pub fn reference(&self, delta: f64, seed: u64) -> Option<&ReferenceRun> {
        self.runs.iter().find(|r| r.delta == delta && r.seed == seed)
    }

    pub fn audit_bounds(&self) -> AuditBounds {
        let mut b = self.audit;
        for i in 0..5 {
            b.a[i] *= self.safety;
            b.b[i] *= self.safety;
        }
        b
    }

    pub fn eps_limit(&self, delta: f64, l: f64, theta0: f64) -> f64 {
        self.safety * self.eps_constant * (delta + (-0.5 * theta0 * l).exp())
    }

    pub fn drift_limit(&self, shape: f64) -> f64 {
        self.safety * self.drift_constant * shape
    }
}

pub fn reference_configs() -> Result<Vec<ExperimentConfig>> {
    [REFERENCE_CLEAN, REFERENCE_PERTURBED]
        .iter()
        .map(|t| ExperimentConfig::from_toml(t))
        .collect()
}

/// Fit the constants from completed reference runs.
pub fn calibrate(runs: &[EvolvedRun]) -> Result<Calibration> {
    let first = runs
        .first()
        .and_then(|r| r.monotonicity)
        .ok_or_else(|| Error::Config("calibration needs two-soliton runs".into()))?;
    let mut refs = Vec::new();
    let mut eps_constant = 0.0f64;
    let mut drift_constant = 0.0f64;
    for r in runs {
        let m = r
            .monotonicity
            .ok_or_else(|| Error::Config("calibration needs two-soliton runs".into()))?;
        let rep = &r.report;
        eps_constant = eps_constant
            .max(rep.sup_h1_eps / (rep.delta + (-0.5 * m.thetas.theta0 * m.l).exp()));
        drift_constant = drift_constant.max(rep.max_param_drift / rep.drift_shape);
        refs.push(ReferenceRun {
            delta: rep.delta,
            seed: rep.seed,
            sup_h1_eps: rep.sup_h1_eps,
            max_param_drift: rep.max_param_drift,
            drift_shape: rep.drift_shape,
        });
    }
    let traces: Vec<&[AuditSample]> = runs.iter().map(|r| r.functionals.as_slice()).collect();
    Ok(Calibration {
        safety: SAFETY,
        runs: refs,
        eps_constant,
        drift_constant,
        audit: calibrate_bounds(&traces, &first, 1.0, NOISE_FLOOR),
    })
}
