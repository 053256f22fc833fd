//! Acceptance criteria. One PASS/FAIL line each; nonzero exit on any FAIL.

use std::time::Instant;

use gdnls::criterion::{appendix_positivity, classify, f_of, hessian_d, z0_of, Classification};
use gdnls::evolver::{evolve, step, EvolveOptions};
use gdnls::functionals::{action_functionals, virial_rates, weighted_mass_momentum, Weight};
use gdnls::harness::calibration::reference_configs;
use gdnls::harness::{run_two_soliton_experiment, Calibration, EvolvedRun, ExperimentConfig, RunArtifact, RunStatus};
use gdnls::linop::{
    assemble, constrained_coercivity, kernel_and_hessian_identities, spectrum, LinearizedOperator,
};
use gdnls::modulation::{decompose, jacobian, jacobian_block, soliton_sum};
use gdnls::soliton::{conserved_of_soliton, sample_soliton, stationary_residual};
use gdnls::{Grid, GridField, Result, SolitonParams};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String)>;

fn p(s: f64, w: f64, c: f64) -> SolitonParams {
    SolitonParams::new(s, w, c).expect("parameters in the cone")
}

fn soliton_exactness() -> Outcome {
    let r = stationary_residual(&p(1.2, 1.0, 0.3), Grid::new(4096, 80.0)?)?;
    Ok((r <= 1e-8, format!("residual {r:.2e} <= 1e-8")))
}

fn closed_form_invariants() -> Outcome {
    let c = conserved_of_soliton(&p(1.0, 1.0, 0.0))?;
    let dm = (c.mass - std::f64::consts::PI).abs();
    let dp = (c.momentum - 2.0).abs();
    let de = c.energy.abs();
    Ok((
        dm <= 1e-10 && dp <= 1e-10 && de <= 1e-9,
        format!("|dM| {dm:.1e}, |dP| {dp:.1e}, |E| {de:.1e}"),
    ))
}

fn variational_identity() -> Outcome {
    let grid = Grid::new(4096, 80.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let s = rng.random_range(1.05..1.95);
        let w = rng.random_range(1.0..3.0);
        let c = rng.random_range(-0.7..0.7) * 2.0 * f64::sqrt(w);
        let q = p(s, w, c);
        let u = GridField::new(grid, 0.0, sample_soliton(&q, grid, 0.0, 0.0))?;
        worst = worst.max(action_functionals(&u, &q).k.abs());
    }
    Ok((worst <= 1e-9, format!("max |K(Q)| {worst:.2e} over 10 waves")))
}

fn criterion_identity() -> Outcome {
    let mut f_err = 0.0f64;
    for i in -9..=9 {
        f_err = f_err.max((f_of(i as f64 * 0.1, 1.0)? + 1.0).abs());
    }
    let sigmas: Vec<f64> = (1..=19).map(|i| 1.0 + 0.05 * i as f64).collect();
    let mut z = Vec::new();
    for &s in &sigmas {
        z.push(z0_of(s)?.unwrap_or(f64::NAN));
    }
    let decreasing = z.windows(2).all(|w| w[1] < w[0]);
    let sign_change = z[0] > 0.0 && z[z.len() - 1] < 0.0;
    Ok((
        f_err <= 1e-8 && decreasing && sign_change,
        format!(
            "max |F(z;1)+1| {f_err:.1e}, z0 decreasing {decreasing}, z0(1.05) {:.4}, z0(1.95) {:.4}",
            z[0],
            z[z.len() - 1]
        ),
    ))
}

fn nondegeneracy_sign() -> Outcome {
    let z0 = z0_of(1.2)?.unwrap_or(f64::NAN);
    let below = hessian_d(&p(1.2, 1.0, 2.0 * z0 - 0.1))?.det;
    let above = hessian_d(&p(1.2, 1.0, 2.0 * z0 + 0.1))?.det;
    Ok((
        below < 0.0 && above > 0.0,
        format!("det below {below:.3e}, above {above:.3e}"),
    ))
}

fn appendix_positivity_grid() -> Outcome {
    let mut ok = 0;
    let mut first_err = None;
    for i in 0..10 {
        for j in 0..10 {
            let w = 0.5 + 0.5 * i as f64;
            let c = (-0.9 + 0.2 * j as f64) * 2.0 * f64::sqrt(w);
            match appendix_positivity(&p(1.2, w, c)) {
                Ok(_) => ok += 1,
                Err(e) => {
                    first_err.get_or_insert(e.to_string());
                }
            }
        }
    }
    Ok((
        ok == 100,
        format!("{ok}/100 points satisfy the bound{}", first_err.map(|e| format!(" ({e})")).unwrap_or_default()),
    ))
}

fn spectral_picture() -> Outcome {
    let grid = Grid::new(1024, 60.0)?;
    let sets = [(1.0, 0.3), (1.0, 0.0), (1.0, -0.5), (2.0, 0.5), (1.5, -1.0)];
    let mut pass = true;
    let mut lines = Vec::new();
    for (w, c) in sets {
        let q = p(1.2, w, c);
        let stable = classify(&q)?.classification == Classification::Stable;
        let a = assemble(&q, grid)?;
        let s = spectrum(&a, 6)?;
        let m = constrained_coercivity(&a)?;
        let ok = stable && s.n_neg == 1 && s.n_zero == 2 && s.kernel_angle <= 1e-3 && m.margin > 0.0;
        pass &= ok;
        lines.push(format!(
            "({w},{c}): neg {} zero {} angle {:.1e} margin {:.3}",
            s.n_neg, s.n_zero, s.kernel_angle, m.margin
        ));
    }
    Ok((pass, lines.join("; ")))
}

fn hessian_identities() -> Outcome {
    let op = LinearizedOperator::new(&p(1.2, 1.0, 0.3), Grid::new(4096, 80.0)?)?;
    let r = kernel_and_hessian_identities(&op)?;
    Ok((
        r.omega <= 1e-5 && r.speed <= 1e-5,
        format!("omega {:.2e}, speed {:.2e}", r.omega, r.speed),
    ))
}

fn conservation() -> Outcome {
    let q = p(1.2, 1.0, 0.3);
    let grid = Grid::new(4096, 80.0)?;
    let u0 = GridField::new(grid, 0.0, sample_soliton(&q, grid, 0.0, 0.0))?;
    let run = |dt: f64| {
        let opts = EvolveOptions {
            t_end: 20.0,
            dt,
            sigma: 1.2,
            sample_every: 1000,
            nonlinear: true,
        };
        evolve(u0.clone(), &opts, |_, _| Ok(())).map(|o| o.trace)
    };
    let coarse = run(1e-3)?;
    let fine = run(5e-4)?;
    let (m, e) = (fine.mass_drift(), fine.energy_drift());
    let ratio = coarse.energy_drift() / e;
    Ok((
        m <= 1e-9 && e <= 1e-8 && ratio >= 12.0,
        format!("mass {m:.1e}, energy {e:.1e}, energy drift ratio under halving {ratio:.1}"),
    ))
}

fn virial_identities(runs: &[EvolvedRun]) -> Outcome {
    let mut worst = (0.0f64, 0.0f64);
    let dt = 1e-4;
    for run in runs {
        let last = run.records.last().expect("tracked run");
        for (u, x) in [(&run.initial, &run.records[0].q), (&run.final_field, &last.q)] {
            for k in 0..2 {
                for off in [-1.0, 1.0] {
                    let g = Weight::Tanh {
                        center: x[4 + k] + off,
                        scale: 2.0,
                        sign: 1.0,
                    };
                    let (rm, rp) = virial_rates(u, &g, 1.2);
                    let (mp, pp) = weighted_mass_momentum(&step(u, dt, 1.2)?, &g, 1.2);
                    let (mm, pm) = weighted_mass_momentum(&step(u, -dt, 1.2)?, &g, 1.2);
                    let fm = (mp - mm) / (2.0 * dt);
                    let fp = -(pp - pm) / (2.0 * dt);
                    worst.0 = worst.0.max((fm - rm).abs() / rm.abs());
                    worst.1 = worst.1.max((fp - rp).abs() / rp.abs());
                }
            }
        }
    }
    Ok((
        worst.0 <= 1e-5 && worst.1 <= 1e-5,
        format!("max relative error mass {:.1e}, momentum {:.1e}", worst.0, worst.1),
    ))
}

fn modulation_exactness() -> Outcome {
    let grid = Grid::new(4096, 160.0)?;
    let q = [4.0, 4.4, -1.0, 1.0, -20.0, 20.0, 0.3, -0.8];
    let u = GridField::new(grid, 0.0, soliton_sum(grid, 1.2, &q)?)?;
    let guess: Vec<f64> = q.iter().map(|v| v + 0.01).collect();
    let s = decompose(&u, 1.2, &guess)?;
    let q_err = s.q.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let jac = jacobian(&u, 1.2, &q)?;
    let mut det_err = 0.0f64;
    for k in 0..2 {
        let w = p(1.2, q[k], q[2 + k]);
        let expect = hessian_d(&w)?.det * appendix_positivity(&w)?;
        let got = jacobian_block(&jac, k, k).determinant();
        det_err = det_err.max(((got - expect) / expect).abs());
    }
    Ok((
        q_err <= 1e-10 && s.h1_eps <= 1e-12 && det_err <= 1e-4,
        format!(
            "|q - q*| {q_err:.1e}, |eps| {:.1e}, block det rel error {det_err:.1e}",
            s.h1_eps
        ),
    ))
}

fn main_runs() -> Result<Vec<EvolvedRun>> {
    let cal = Calibration::fixture()?;
    let bounds = cal.audit_bounds();
    let mut cfgs = reference_configs()?;
    // held out of the calibration
    let extra = cfgs[1].with_seed(2);
    cfgs.push(extra);
    cfgs.iter()
        .map(|c| run_two_soliton_experiment(c, Some(&bounds)))
        .collect()
}

fn two_soliton_stability(runs: &[EvolvedRun]) -> Outcome {
    let cal = Calibration::fixture()?;
    let z0 = z0_of(1.2)?.unwrap_or(f64::NAN);
    let mut pass = z0 > 0.24;
    let mut lines = vec![format!("z0 {z0:.4}")];
    for r in runs {
        let rep = &r.report;
        let th = rep.thetas.expect("two waves");
        let eps_cap = cal
            .reference(rep.delta, rep.seed)
            .map(|c| cal.safety * c.sup_h1_eps)
            .unwrap_or(f64::INFINITY)
            .min(cal.eps_limit(rep.delta, rep.separation, th.theta0));
        let drift_cap = cal.drift_limit(rep.drift_shape);
        let ok = rep.status == RunStatus::Ok
            && rep.sup_h1_eps <= eps_cap
            && rep.min_separation_margin >= 0.0
            && rep.max_param_drift <= drift_cap;
        pass &= ok;
        lines.push(format!(
            "delta {} seed {}: {:?}, sup eps {:.2e} (cap {:.2e}), separation margin {:.2}, drift {:.2e} (cap {:.2e})",
            rep.delta, rep.seed, rep.status, rep.sup_h1_eps, eps_cap, rep.min_separation_margin,
            rep.max_param_drift, drift_cap
        ));
    }
    Ok((pass, lines.join("; ")))
}

fn monotonicity(runs: &[EvolvedRun]) -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    for r in runs {
        let a = r.report.audit.as_ref().expect("audited run");
        pass &= a.passed();
        let worst = a.worst_ratio.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lines.push(format!(
            "delta {} seed {}: {} violations, worst increment/bound {worst:.2}",
            r.report.delta,
            r.report.seed,
            a.violations.len()
        ));
    }
    Ok((pass, lines.join("; ")))
}

/// `u_λ(t, x) = λ^{1/(2σ)} u(λ²t, λx)` maps grids onto grids exactly.
fn scaling_symmetry() -> Outcome {
    let sigma = 1.2;
    let lambda: f64 = 2.0;
    let grid = Grid::new(2048, 80.0)?;
    let small = Grid::new(2048, 80.0 / lambda)?;
    let u0 = GridField::from_fn(grid, 0.0, |x| {
        Complex64::from_polar(1.5 * (-x * x / 4.0).exp(), 0.3 * x)
    });
    let amp = lambda.powf(0.5 / sigma);
    let v0 = GridField::new(small, 0.0, u0.samples.iter().map(|z| z * amp).collect())?;
    let opts = |t_end: f64, dt: f64| EvolveOptions {
        t_end,
        dt,
        sigma,
        sample_every: usize::MAX,
        nonlinear: true,
    };
    let u = evolve(u0, &opts(2.0, 1e-3), |_, _| Ok(()))?.field;
    let l2 = lambda * lambda;
    let v = evolve(v0, &opts(2.0 / l2, 1e-3 / l2), |_, _| Ok(()))?.field;
    let err = u
        .samples
        .iter()
        .zip(&v.samples)
        .map(|(a, b)| (a * amp - b).norm())
        .fold(0.0, f64::max)
        / v.max_abs();
    Ok((err <= 1e-6, format!("max relative mismatch {err:.1e} at lambda = 2")))
}

fn reproducibility() -> Outcome {
    let text = r#"
scenario = "two_soliton"
sigma = 1.2
delta = 1e-3
seed = 9

[grid]
n = 2048
l_dom = 80.0

[time]
dt = 1e-3
t_end = 1.0
sample_every = 100

[[waves]]
omega = 4.0
c = -1.0
x = -12.0

[[waves]]
omega = 4.4
c = 1.0
x = 12.0
"#;
    let cfg = ExperimentConfig::from_toml(text)?;
    let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
    for d in &dirs {
        RunArtifact::run(cfg.clone(), None)?.write(d.path())?;
    }
    let mut same = true;
    for name in ["trace.csv", "params.csv", "functionals.csv", "report.json", "manifest.json"] {
        same &= std::fs::read(dirs[0].path().join(name))? == std::fs::read(dirs[1].path().join(name))?;
    }
    Ok((same, "trace, params, functionals, report and manifest byte-identical".into()))
}

fn report(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let (ok, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "{} [{id:02}] {name}: {detail} ({:.1}s)",
        if ok { "PASS" } else { "FAIL" },
        t.elapsed().as_secs_f64()
    );
    ok
}

fn main() {
    let mut all = true;
    all &= report(1, "soliton exactness", soliton_exactness);
    all &= report(2, "closed-form invariants", closed_form_invariants);
    all &= report(3, "variational identity", variational_identity);
    all &= report(4, "criterion identity", criterion_identity);
    all &= report(5, "non-degeneracy sign", nondegeneracy_sign);
    all &= report(6, "positivity bound", appendix_positivity_grid);
    all &= report(7, "spectral picture", spectral_picture);
    all &= report(8, "hessian identities", hessian_identities);
    all &= report(9, "conservation", conservation);

    let t = Instant::now();
    let runs = main_runs();
    eprintln!("main runs took {:.0}s", t.elapsed().as_secs_f64());
    match &runs {
        Ok(runs) => {
            all &= report(10, "virial identities", || virial_identities(runs));
            all &= report(11, "modulation exactness", modulation_exactness);
            all &= report(12, "two-soliton stability", || two_soliton_stability(runs));
            all &= report(13, "monotonicity audit", || monotonicity(runs));
        }
        Err(e) => {
            let msg = e.to_string();
            all &= report(10, "virial identities", || Ok((false, format!("no runs: {msg}"))));
            all &= report(11, "modulation exactness", modulation_exactness);
            all &= report(12, "two-soliton stability", || Ok((false, format!("no runs: {msg}"))));
            all &= report(13, "monotonicity audit", || Ok((false, format!("no runs: {msg}"))));
        }
    }
    all &= report(14, "scaling symmetry", scaling_symmetry);
    all &= report(15, "reproducibility", reproducibility);
    if !all {
        std::process::exit(1);
    }
}
