use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Scenario};
use crate::criterion::{classify, theorem_feasibility, Classification, Feasibility};
use crate::error::{Error, Result};
use crate::evolver::{evolve, EvolveOptions, InvariantTrace};
use crate::functionals::{
    j_family, localized_action_and_h, monotonicity_audit, split_defect, AuditBounds,
    AuditReport, AuditSample, MonotonicityConfig, Thetas,
};
use crate::grid::{Grid, GridField, Spectral};
use crate::linop::{
    assemble, constrained_coercivity, kernel_and_hessian_identities, spectrum, CoercivityReport,
    IdentityResiduals, SpectrumReport,
};
use crate::modulation::{decompose, soliton_sum, ModulationState, TrackRecord, Tracker};
use crate::soliton::{check_resolution, sample_soliton};

/// Seeded random field with modes `|k| ≤ k_max/4`, scaled to `‖·‖_{H¹} = δ`.
pub fn perturbation(grid: Grid, seed: u64, delta: f64) -> Vec<Complex64> {
    let sp = Spectral::new(grid);
    let kmax = std::f64::consts::PI / grid.dx();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hat: Vec<Complex64> = sp
        .wavenumbers()
        .iter()
        .map(|&k| {
            if k.abs() <= 0.25 * kmax {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    sp.inverse(&mut hat);
    let norm = sp.h1_norm(&hat);
    if delta == 0.0 || norm == 0.0 {
        return vec![Complex64::new(0.0, 0.0); grid.n];
    }
    hat.iter().map(|z| z * (delta / norm)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    BlowUp,
    TubeExit,
}

/// Summary of an evolved run (single or two waves).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: RunStatus,
    pub sigma: f64,
    pub delta: f64,
    pub seed: u64,
    pub t_final: f64,
    pub checkpoints: usize,
    pub classifications: Vec<Classification>,
    pub feasibility: Option<Feasibility>,
    pub eps0_h1: f64,
    pub sup_h1_eps: f64,
    /// `max_t Σ_k |ω_k(t) − ω_k(0)| + |c_k(t) − c_k(0)|`
    pub max_param_drift: f64,
    /// `sup‖ε‖²/L + ‖ε(0)‖² + e^{−θ₀L}`; zero for single waves.
    pub drift_shape: f64,
    /// `max_t ‖u − Q_{ω⁰,c⁰}(· − x(t)) e^{iγ(t)}‖_{H¹}`; single waves only.
    pub orbit_distance: f64,
    /// `min_t (x₂ − x₁) − ½(L + θ₂t)`; two waves only.
    pub min_separation_margin: f64,
    pub separation: f64,
    pub thetas: Option<Thetas>,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub max_orth_residual: f64,
    pub max_split_defect: f64,
    /// `max_t |S_loc(t) − S_loc(0)|`
    pub s_loc_drift: f64,
    pub min_h_form: f64,
    pub blow_up: Option<(f64, f64)>,
    pub tube_exit: Option<(f64, String)>,
    pub audit: Option<AuditReport>,
}

/// Everything an evolved run produces.
#[derive(Debug, Clone)]
pub struct EvolvedRun {
    pub report: RunReport,
    pub k: usize,
    pub trace: InvariantTrace,
    pub records: Vec<TrackRecord>,
    pub functionals: Vec<AuditSample>,
    pub initial: GridField,
    pub final_field: GridField,
    pub monotonicity: Option<MonotonicityConfig>,
}

struct Observed {
    tracker: Tracker,
    trace: InvariantTrace,
    samples: Vec<AuditSample>,
    tube_exit: Option<(f64, String)>,
    last: Option<GridField>,
    min_margin: f64,
    split: f64,
    s_loc0: Option<f64>,
    s_drift: f64,
    min_h: f64,
    orbit: f64,
}

fn initial_field(cfg: &ExperimentConfig) -> Result<(Grid, f64, GridField)> {
    let sigma = cfg.sigma()?;
    let grid = cfg.grid()?;
    for p in cfg.wave_params()? {
        check_resolution(&p, grid)?;
    }
    let r = soliton_sum(grid, sigma, &cfg.initial_q())?;
    GridField::new(grid, 0.0, r.clone())?.check_edges(1e-8)?;
    let pert = perturbation(grid, cfg.seed, cfg.delta);
    let u0 = GridField::new(grid, 0.0, r.iter().zip(&pert).map(|(a, b)| a + b).collect())?;
    Ok((grid, sigma, u0))
}

/// Evolve the configured waves, tracking modulation at every checkpoint.
/// For two waves the hypotheses of the stability theorem are checked first
/// (skipped with `force`), the localized functionals are recorded and, when
/// `bounds` are given, audited.
pub fn run_waves(cfg: &ExperimentConfig, bounds: Option<&AuditBounds>) -> Result<EvolvedRun> {
    let params = cfg.wave_params()?;
    let k = params.len();
    let mut feasibility = None;
    if k == 2 {
        let f = theorem_feasibility(&params[0], &params[1])?;
        if !f.all() && !cfg.force {
            return Err(Error::Infeasible(f.failure().unwrap_or_default()));
        }
        feasibility = Some(f);
    }
    // waves outside the criterion range are reported as degenerate
    let classifications = params
        .iter()
        .map(|p| {
            classify(p)
                .map(|r| r.classification)
                .unwrap_or(Classification::Degenerate)
        })
        .collect();

    let (grid, sigma, u0) = initial_field(cfg)?;
    let time = cfg.time()?;
    let state0 = decompose(&u0, sigma, &cfg.initial_q())?;
    let mono = if k == 2 {
        Some(MonotonicityConfig::from_state(&state0)?)
    } else {
        None
    };
    let q0 = state0.q.clone();
    let reference = params[0];

    let mut obs = Observed {
        tracker: Tracker::new(sigma, q0.clone(), 0.0),
        trace: InvariantTrace::default(),
        samples: Vec::new(),
        tube_exit: None,
        last: None,
        min_margin: f64::INFINITY,
        split: 0.0,
        s_loc0: None,
        s_drift: 0.0,
        min_h: f64::INFINITY,
        orbit: 0.0,
    };
    let sp = Spectral::new(grid);
    let opts = EvolveOptions {
        t_end: time.t_end,
        dt: time.dt,
        sigma,
        sample_every: time.sample_every,
        nonlinear: true,
    };
    let outcome = evolve(u0.clone(), &opts, |u, inv| {
        obs.trace.push(u.t, inv);
        obs.last = Some(u.clone());
        let state: ModulationState = match obs.tracker.push(u) {
            Ok(s) => s,
            Err(e) => {
                obs.tube_exit = Some((u.t, e.to_string()));
                return Err(e);
            }
        };
        if let Some(m) = &mono {
            let family = j_family(u, m, u.t);
            obs.samples.push(AuditSample {
                t: u.t,
                family,
                h1_eps: state.h1_eps,
            });
            obs.split = obs.split.max(split_defect(u, m, u.t).abs());
            let sep = state.x(1) - state.x(0);
            obs.min_margin = obs
                .min_margin
                .min(sep - 0.5 * (m.l + m.thetas.theta2 * u.t));
            let (s_loc, h) = localized_action_and_h(u, m, &state, u.t)?;
            let s0 = *obs.s_loc0.get_or_insert(s_loc);
            obs.s_drift = obs.s_drift.max((s_loc - s0).abs());
            obs.min_h = obs.min_h.min(h);
        } else {
            let r = sample_soliton(&reference, grid, state.x(0), state.gamma(0));
            let d: Vec<Complex64> = u.samples.iter().zip(&r).map(|(a, b)| a - b).collect();
            obs.orbit = obs.orbit.max(sp.h1_norm(&d));
        }
        Ok(())
    });

    let (final_field, blow_up) = match outcome {
        Ok(o) => (o.field, o.blow_up),
        Err(_) if obs.tube_exit.is_some() => (obs.last.clone().unwrap_or(u0.clone()), None),
        Err(e) => return Err(e),
    };
    let status = if blow_up.is_some() {
        RunStatus::BlowUp
    } else if obs.tube_exit.is_some() {
        RunStatus::TubeExit
    } else {
        RunStatus::Ok
    };

    let records = obs.tracker.records;
    let sup_h1_eps = records.iter().fold(0.0f64, |a, r| a.max(r.h1_eps));
    let max_orth = records.iter().fold(0.0f64, |a, r| a.max(r.max_orth));
    let max_param_drift = records.iter().fold(0.0f64, |a, r| {
        let d: f64 = (0..2 * k).map(|i| (r.q[i] - q0[i]).abs()).sum();
        a.max(d)
    });
    let (drift_shape, separation, thetas) = match &mono {
        Some(m) => (
            sup_h1_eps * sup_h1_eps / m.l
                + state0.h1_eps * state0.h1_eps
                + (-m.thetas.theta0 * m.l).exp(),
            m.l,
            Some(m.thetas),
        ),
        None => (0.0, 0.0, None),
    };
    let audit = match (&mono, bounds) {
        (Some(m), Some(b)) => Some(monotonicity_audit(&obs.samples, m, b)),
        _ => None,
    };
    let report = RunReport {
        status,
        sigma,
        delta: cfg.delta,
        seed: cfg.seed,
        t_final: final_field.t,
        checkpoints: records.len(),
        classifications,
        feasibility,
        eps0_h1: state0.h1_eps,
        sup_h1_eps,
        max_param_drift,
        drift_shape,
        orbit_distance: obs.orbit,
        min_separation_margin: if mono.is_some() { obs.min_margin } else { 0.0 },
        separation,
        thetas,
        mass_drift: obs.trace.mass_drift(),
        energy_drift: obs.trace.energy_drift(),
        max_orth_residual: max_orth,
        max_split_defect: obs.split,
        s_loc_drift: obs.s_drift,
        min_h_form: if mono.is_some() { obs.min_h } else { 0.0 },
        blow_up,
        tube_exit: obs.tube_exit,
        audit,
    };
    Ok(EvolvedRun {
        report,
        k,
        trace: obs.trace,
        records,
        functionals: obs.samples,
        initial: u0,
        final_field,
        monotonicity: mono,
    })
}

pub fn run_two_soliton_experiment(
    cfg: &ExperimentConfig,
    bounds: Option<&AuditBounds>,
) -> Result<EvolvedRun> {
    if cfg.scenario != Scenario::TwoSoliton {
        return Err(Error::Config(format!("scenario {:?} is not two_soliton", cfg.scenario)));
    }
    run_waves(cfg, bounds)
}

pub fn run_single_soliton(cfg: &ExperimentConfig) -> Result<EvolvedRun> {
    if cfg.scenario != Scenario::Single {
        return Err(Error::Config(format!("scenario {:?} is not single", cfg.scenario)));
    }
    run_waves(cfg, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveSpectrum {
    pub omega: f64,
    pub c: f64,
    pub spectrum: SpectrumReport,
    pub coercivity: CoercivityReport,
    pub identities: IdentityResiduals,
}

pub fn run_spectrum(cfg: &ExperimentConfig) -> Result<Vec<WaveSpectrum>> {
    let grid = cfg.grid()?;
    let count = cfg.eigen_count.unwrap_or(8);
    cfg.wave_params()?
        .iter()
        .map(|p| {
            let a = assemble(p, grid)?;
            Ok(WaveSpectrum {
                omega: p.omega,
                c: p.c,
                spectrum: spectrum(&a, count)?,
                coercivity: constrained_coercivity(&a)?,
                identities: kernel_and_hessian_identities(a.operator())?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeCheck {
    pub t_end: f64,
    pub max_error: f64,
    pub mass_drift: f64,
}

/// Linear evolution of `e^{−x²}` against `e^{−x²/(1+4it)}/√(1+4it)`.
pub fn run_free_check(cfg: &ExperimentConfig) -> Result<FreeCheck> {
    let grid = cfg.grid()?;
    let time = cfg.time()?;
    let exact = |t: f64, x: f64| {
        let s = Complex64::new(1.0, 4.0 * t);
        (-x * x / s).exp() / s.sqrt()
    };
    let u0 = GridField::from_fn(grid, 0.0, |x| exact(0.0, x));
    let opts = EvolveOptions {
        t_end: time.t_end,
        dt: time.dt,
        sigma: 1.0,
        sample_every: time.sample_every,
        nonlinear: false,
    };
    let out = evolve(u0, &opts, |_, _| Ok(()))?;
    let f = &out.field;
    let max_error = (0..grid.n)
        .map(|j| (f.samples[j] - exact(f.t, grid.x(j))).norm())
        .fold(0.0, f64::max);
    Ok(FreeCheck {
        t_end: f.t,
        max_error,
        mass_drift: out.trace.mass_drift(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perturbation_is_normalized_and_band_limited() {
        let grid = Grid::new(256, 40.0).unwrap();
        let p = perturbation(grid, 3, 1e-3);
        let sp = Spectral::new(grid);
        assert!((sp.h1_norm(&p) - 1e-3).abs() < 1e-15);
        let mut hat = p.clone();
        sp.forward(&mut hat);
        let kmax = std::f64::consts::PI / grid.dx();
        for (z, &k) in hat.iter().zip(sp.wavenumbers()) {
            if k.abs() > 0.25 * kmax {
                assert!(z.norm() < 1e-12);
            }
        }
        assert_eq!(p, perturbation(grid, 3, 1e-3));
        assert_ne!(p, perturbation(grid, 4, 1e-3));
        assert!(perturbation(grid, 3, 0.0).iter().all(|z| z.norm() == 0.0));
    }
}
