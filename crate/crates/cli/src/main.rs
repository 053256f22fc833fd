use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use gdnls::criterion::{classify, theorem_feasibility, z0_of};
use gdnls::functionals::{monotonicity_audit, MonotonicityConfig};
use gdnls::harness::calibration::{calibrate, reference_configs};
use gdnls::harness::config::SweepConfig;
use gdnls::harness::io::{read_functionals_csv, read_params_csv, read_snapshot, write_json};
use gdnls::harness::{
    exit_code, run_criterion_sweep, run_waves, status_code, Calibration, ExperimentConfig,
    RunArtifact, Scenario,
};
use gdnls::linop::{assemble, constrained_coercivity, spectrum};
use gdnls::modulation::decompose;
use gdnls::soliton::{conserved_of_soliton, soliton_moments, stationary_residual};
use gdnls::{Error, Grid, Result, SolitonParams};

#[derive(Parser)]
#[command(name = "gdnls", version, about = "Solitary waves of the generalized derivative NLS")]
struct Cli {
    /// Print results as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads. Runs are sequential, so only 1 is meaningful.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Copy)]
struct WaveArgs {
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    omega: f64,
    #[arg(long, allow_hyphen_values = true)]
    c: f64,
}

impl WaveArgs {
    fn params(&self) -> Result<SolitonParams> {
        SolitonParams::new(self.sigma, self.omega, self.c)
    }
}

#[derive(Args, Clone, Copy)]
struct GridArgs {
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = 60.0)]
    l_dom: f64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Conserved quantities and profile moments of one wave.
    Soliton {
        #[command(flatten)]
        wave: WaveArgs,
        /// Also report the stationary residual on an N-point grid.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 80.0)]
        l_dom: f64,
    },
    /// Stability criterion.
    Criterion {
        #[command(subcommand)]
        cmd: CriterionCmd,
    },
    /// Spectrum and constrained coercivity of the linearized operator.
    Spectrum {
        #[command(flatten)]
        wave: WaveArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 8)]
        count: usize,
    },
    /// Evolve a single or two-soliton configuration without auditing.
    Evolve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Decompose a snapshot into modulated waves plus remainder.
    Modulate {
        #[arg(long)]
        snapshot: PathBuf,
        /// Initial guess `ω₁,…,c₁,…,x₁,…,γ₁,…`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        guess: Vec<f64>,
    },
    /// Audit the localized functionals of a stored two-soliton run.
    Audit {
        /// Run directory holding `functionals.csv` and `config.toml`.
        #[arg(long)]
        trace: PathBuf,
        /// params.csv to read the initial parameters from, if not in the run directory.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Calibration file; defaults to the built-in fixture.
        #[arg(long)]
        bounds: Option<PathBuf>,
    },
    /// Run any configured scenario and write its artifacts.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Rerun the pinned reference runs and write fitted constants.
    Calibrate,
}

#[derive(Subcommand)]
enum CriterionCmd {
    /// Root of F(·; σ) in (−1, 1).
    Z0 {
        #[arg(long)]
        sigma: f64,
    },
    /// Stable, unstable or degenerate, with the sign of det d″.
    Classify {
        #[command(flatten)]
        wave: WaveArgs,
    },
    /// Hypotheses of the two-soliton result.
    Feasibility {
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        omega1: f64,
        #[arg(long, allow_hyphen_values = true)]
        c1: f64,
        #[arg(long)]
        omega2: f64,
        #[arg(long, allow_hyphen_values = true)]
        c2: f64,
    },
    /// z₀ table and sign map of det d″ over c/√ω.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        sigmas: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        ratios: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
    },
}

/// Value printed on stdout and the exit code to return.
struct Output {
    value: Value,
    code: i32,
}

impl From<Value> for Output {
    fn from(value: Value) -> Self {
        Self { value, code: 0 }
    }
}

fn print(value: &Value, as_json: bool) {
    if as_json {
        println!("{}", serde_json::to_string_pretty(value).unwrap_or_default());
        return;
    }
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                match v {
                    Value::String(s) => println!("{k}: {s}"),
                    other => println!("{k}: {other}"),
                }
            }
        }
        Value::Array(items) => {
            for v in items {
                println!("{v}");
            }
        }
        other => println!("{other}"),
    }
}

fn out_dir(cli_out: &Option<PathBuf>, config: &ExperimentConfig) -> Option<PathBuf> {
    cli_out.clone().or_else(|| config.output.clone())
}

fn write_artifact(art: &RunArtifact, dir: Option<PathBuf>) -> Result<Value> {
    let mut report = art.report_json()?;
    if let Some(d) = dir {
        let m = art.write(&d)?;
        if let Value::Object(map) = &mut report {
            map.insert("config_hash".into(), json!(m.config_hash));
            map.insert("artifacts".into(), json!(d.display().to_string()));
        }
    }
    Ok(report)
}

fn run(cli: &Cli) -> Result<Output> {
    if cli.threads == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    match &cli.cmd {
        Cmd::Soliton { wave, n, l_dom } => {
            let p = wave.params()?;
            let mut v = json!({
                "params": p,
                "conserved": conserved_of_soliton(&p)?,
                "moments": soliton_moments(&p)?,
            });
            if let Some(n) = n {
                v["stationary_residual"] = json!(stationary_residual(&p, Grid::new(*n, *l_dom)?)?);
            }
            Ok(v.into())
        }
        Cmd::Criterion { cmd } => criterion(cmd, &cli.out),
        Cmd::Spectrum { wave, grid, count } => {
            let a = assemble(&wave.params()?, Grid::new(grid.n, grid.l_dom)?)?;
            Ok(json!({
                "spectrum": spectrum(&a, *count)?,
                "coercivity": constrained_coercivity(&a)?,
                "asymmetry": a.asymmetry,
            })
            .into())
        }
        Cmd::Evolve { config } => {
            let cfg = ExperimentConfig::load(config)?;
            if !matches!(cfg.scenario, Scenario::Single | Scenario::TwoSoliton) {
                return Err(Error::Config("evolve needs a single or two_soliton config".into()));
            }
            let dir = out_dir(&cli.out, &cfg);
            let art = RunArtifact {
                outcome: gdnls::harness::Outcome::Waves(Box::new(run_waves(&cfg, None)?)),
                config: cfg,
            };
            let code = status_code(art.status());
            Ok(Output {
                value: write_artifact(&art, dir)?,
                code,
            })
        }
        Cmd::Modulate { snapshot, guess } => {
            let (u, sigma) = read_snapshot(snapshot)?;
            let s = decompose(&u, sigma, guess)?;
            Ok(json!({
                "t": u.t,
                "k": s.k,
                "q": s.q,
                "h1_eps": s.h1_eps,
                "orth_residuals": s.orth_residuals,
                "iterations": s.iterations,
            })
            .into())
        }
        Cmd::Audit {
            trace,
            params,
            bounds,
        } => audit(trace, params.as_deref(), bounds.as_deref(), &cli.out),
        Cmd::Experiment { config } => {
            let cfg = ExperimentConfig::load(config)?;
            let dir = out_dir(&cli.out, &cfg);
            let bounds = Calibration::fixture()?.audit_bounds();
            let art = RunArtifact::run(cfg, Some(&bounds))?;
            let code = status_code(art.status());
            Ok(Output {
                value: write_artifact(&art, dir)?,
                code,
            })
        }
        Cmd::Calibrate => {
            let runs = reference_configs()?
                .iter()
                .map(|c| run_waves(c, None))
                .collect::<Result<Vec<_>>>()?;
            let cal = calibrate(&runs)?;
            if let Some(p) = &cli.out {
                write_json(p, &cal)?;
            }
            Ok(serde_json::to_value(&cal)?.into())
        }
    }
}

fn criterion(cmd: &CriterionCmd, out: &Option<PathBuf>) -> Result<Output> {
    match cmd {
        CriterionCmd::Z0 { sigma } => Ok(json!({ "sigma": sigma, "z0": z0_of(*sigma)? }).into()),
        CriterionCmd::Classify { wave } => Ok(serde_json::to_value(classify(&wave.params()?)?)?.into()),
        CriterionCmd::Feasibility {
            sigma,
            omega1,
            c1,
            omega2,
            c2,
        } => {
            let f = theorem_feasibility(
                &SolitonParams::new(*sigma, *omega1, *c1)?,
                &SolitonParams::new(*sigma, *omega2, *c2)?,
            )?;
            let mut v = serde_json::to_value(f)?;
            v["feasible"] = json!(f.all());
            v["failure"] = json!(f.failure());
            Ok(Output {
                value: v,
                code: if f.all() { 0 } else { 2 },
            })
        }
        CriterionCmd::Sweep {
            sigmas,
            ratios,
            omega,
        } => {
            let cfg = ExperimentConfig::sweep(SweepConfig {
                sigmas: sigmas.clone(),
                ratios: ratios.clone(),
                omega: *omega,
            });
            let rows = run_criterion_sweep(&cfg)?;
            if let Some(p) = out {
                gdnls::harness::sweep::write_sweep_csv(p, &rows)?;
            }
            Ok(serde_json::to_value(rows)?.into())
        }
    }
}

fn audit(
    dir: &Path,
    params: Option<&Path>,
    bounds: Option<&Path>,
    out: &Option<PathBuf>,
) -> Result<Output> {
    let cfg = ExperimentConfig::load(&dir.join("config.toml"))?;
    let sigma = cfg.sigma()?;
    let params_path = params.map(Path::to_path_buf).unwrap_or_else(|| dir.join("params.csv"));
    let (k, records) = read_params_csv(&params_path)?;
    let first = records
        .first()
        .filter(|_| k == 2)
        .ok_or_else(|| Error::Format("audit needs a two-wave params table".into()))?;
    let q = &first.q;
    let mono = MonotonicityConfig::new(
        &SolitonParams::new(sigma, q[0], q[2])?,
        &SolitonParams::new(sigma, q[1], q[3])?,
        q[4],
        q[5],
        q[5] - q[4],
    )?;
    let cal: Calibration = match bounds {
        Some(p) => serde_json::from_slice(&std::fs::read(p)?)?,
        None => Calibration::fixture()?,
    };
    let samples = read_functionals_csv(&dir.join("functionals.csv"))?;
    let report = monotonicity_audit(&samples, &mono, &cal.audit_bounds());
    if let Some(p) = out {
        write_json(p, &report)?;
    }
    let mut v = serde_json::to_value(&report)?;
    v["passed"] = json!(report.passed());
    Ok(Output {
        value: v,
        code: 0,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(o) => {
            print(&o.value, cli.json);
            ExitCode::from(o.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
