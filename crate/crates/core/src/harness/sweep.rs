use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::criterion::{classify_with_root, z0_of, Classification};
use crate::error::{Error, Result};
use crate::soliton::SolitonParams;

/// One `(σ, c/√ω)` point. Failures are kept in `error` and the sweep goes on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub z0: Option<f64>,
    pub ratio: Option<f64>,
    pub det_dpp: Option<f64>,
    pub classification: Option<Classification>,
    /// `det d″ < 0` exactly when `c < 2z₀√ω`.
    pub sign_consistent: Option<bool>,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(sigma: f64, z0: Option<f64>, ratio: Option<f64>, e: Error) -> Self {
        Self {
            sigma,
            z0,
            ratio,
            det_dpp: None,
            classification: None,
            sign_consistent: None,
            error: Some(e.to_string()),
        }
    }
}

pub fn run_criterion_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("missing [sweep]".into()))?;
    let mut rows = Vec::new();
    for &sigma in &sweep.sigmas {
        let z0 = match z0_of(sigma) {
            Ok(Some(z)) => z,
            Ok(None) => {
                rows.push(SweepRow::failed(sigma, None, None, Error::NoRoot(sigma)));
                continue;
            }
            Err(e) => {
                rows.push(SweepRow::failed(sigma, None, None, e));
                continue;
            }
        };
        if sweep.ratios.is_empty() {
            rows.push(SweepRow {
                sigma,
                z0: Some(z0),
                ratio: None,
                det_dpp: None,
                classification: None,
                sign_consistent: None,
                error: None,
            });
        }
        for &r in &sweep.ratios {
            let c = r * sweep.omega.sqrt();
            let row = SolitonParams::new(sigma, sweep.omega, c)
                .and_then(|p| classify_with_root(&p, z0));
            rows.push(match row {
                Ok(rep) => SweepRow {
                    sigma,
                    z0: Some(z0),
                    ratio: Some(r),
                    det_dpp: Some(rep.det_dpp),
                    classification: Some(rep.classification),
                    sign_consistent: Some((rep.det_dpp < 0.0) == (r < 2.0 * z0)),
                    error: None,
                },
                Err(e) => SweepRow::failed(sigma, Some(z0), Some(r), e),
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "sigma",
        "z0",
        "ratio",
        "det_dpp",
        "classification",
        "sign_consistent",
        "error",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.sigma.to_string(),
            opt(r.z0),
            opt(r.ratio),
            opt(r.det_dpp),
            r.classification.map(|c| format!("{c:?}")).unwrap_or_default(),
            r.sign_consistent.map(|b| b.to_string()).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
