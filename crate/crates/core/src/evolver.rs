//! Integrating-factor RK4 for `u_t = i u_xx − |u|^{2σ} u_x` on a periodic
//! grid. The linear phase `e^{−ik²t}` is applied exactly; the nonlinear term is
//! evaluated pseudospectrally and its spectrum truncated by the 2/3 rule.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField, Spectral};

/// Conserved quantities and norms of one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Invariants {
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
    pub h1: f64,
    pub max_gradient: f64,
}

/// `M = ½∫|u|²`, `P = −½ Im∫ū u_x`,
/// `E = ½∫|u_x|² + (2σ+2)^{-1} Im∫|u|^{2σ} ū u_x`, and `‖u‖_{H¹}`.
pub fn grid_invariants(f: &GridField, sigma: f64) -> Invariants {
    let sp = Spectral::new(f.grid());
    invariants_with(&sp, &f.samples, sigma)
}

pub fn invariants_with(sp: &Spectral, u: &[Complex64], sigma: f64) -> Invariants {
    let ux = sp.derivative(u);
    let dx = sp.dx();
    let mut m = 0.0;
    let mut p = 0.0;
    let mut kin = 0.0;
    let mut nl = 0.0;
    let mut g: f64 = 0.0;
    for (a, b) in u.iter().zip(&ux) {
        let rho = a.norm_sqr();
        let im = (a.conj() * b).im;
        m += rho;
        p += im;
        kin += b.norm_sqr();
        if rho > 0.0 {
            nl += rho.powf(sigma) * im;
        }
        g = g.max(b.norm());
    }
    Invariants {
        mass: 0.5 * m * dx,
        momentum: -0.5 * p * dx,
        energy: 0.5 * kin * dx + nl * dx / (2.0 * sigma + 2.0),
        h1: ((m + kin) * dx).sqrt(),
        max_gradient: g,
    }
}

/// Time series of [`Invariants`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantTrace {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub momentum: Vec<f64>,
    pub energy: Vec<f64>,
    pub h1_norm: Vec<f64>,
    pub max_gradient: Vec<f64>,
}

impl InvariantTrace {
    pub fn push(&mut self, t: f64, inv: &Invariants) {
        self.times.push(t);
        self.mass.push(inv.mass);
        self.momentum.push(inv.momentum);
        self.energy.push(inv.energy);
        self.h1_norm.push(inv.h1);
        self.max_gradient.push(inv.max_gradient);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `max_t |M(t) − M(0)| / M(0)`.
    pub fn mass_drift(&self) -> f64 {
        relative_drift(&self.mass, self.mass.first().copied().unwrap_or(0.0).abs())
    }

    /// `max_t |E(t) − E(0)| / |E(0) + 1|`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy.first().copied().unwrap_or(0.0);
        relative_drift(&self.energy, (e0 + 1.0).abs())
    }

    pub fn momentum_drift(&self) -> f64 {
        let p0 = self.momentum.first().copied().unwrap_or(0.0);
        relative_drift(&self.momentum, p0.abs().max(1.0))
    }
}

fn relative_drift(v: &[f64], scale: f64) -> f64 {
    let Some(&v0) = v.first() else { return 0.0 };
    let d = v.iter().map(|x| (x - v0).abs()).fold(0.0, f64::max);
    if scale > 0.0 {
        d / scale
    } else {
        d
    }
}

/// Stepper for a fixed grid, exponent and time step.
#[derive(Debug, Clone)]
pub struct Evolver {
    sp: Spectral,
    sigma: f64,
    dt: f64,
    nonlinear: bool,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
}

impl Evolver {
    pub fn new(grid: Grid, sigma: f64, dt: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::SigmaRange(sigma));
        }
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::Domain(format!("time step {dt}")));
        }
        let sp = Spectral::new(grid);
        let phase = |k: f64, h: f64| Complex64::from_polar(1.0, -k * k * h);
        let half = sp.wavenumbers().iter().map(|&k| phase(k, 0.5 * dt)).collect();
        let full = sp.wavenumbers().iter().map(|&k| phase(k, dt)).collect();
        Ok(Self {
            sp,
            sigma,
            dt,
            nonlinear: true,
            half,
            full,
        })
    }

    /// Disable the nonlinear term (free Schrödinger flow).
    pub fn linear_only(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn spectral(&self) -> &Spectral {
        &self.sp
    }

    /// Dealiased Fourier transform of `−|u|^{2σ} u_x` given `û`.
    pub fn nonlinear_hat(&self, uhat: &[Complex64]) -> Vec<Complex64> {
        let n = uhat.len();
        if !self.nonlinear {
            return vec![Complex64::new(0.0, 0.0); n];
        }
        let mut u = uhat.to_vec();
        let mut ux: Vec<Complex64> = uhat
            .iter()
            .enumerate()
            .map(|(j, z)| z * self.sp.derivative_symbol(j))
            .collect();
        self.sp.inverse(&mut u);
        self.sp.inverse(&mut ux);
        for (a, b) in ux.iter_mut().zip(&u) {
            let rho = b.norm_sqr();
            let w = if rho > 0.0 { rho.powf(self.sigma) } else { 0.0 };
            *a *= -w;
        }
        self.sp.forward(&mut ux);
        self.sp.dealias(&mut ux);
        ux
    }

    /// One step in Fourier space.
    pub fn step_hat(&self, uhat: &mut [Complex64]) {
        let h = 0.5 * self.dt;
        let eh = &self.half;
        let ef = &self.full;
        let k1 = self.nonlinear_hat(uhat);
        let a: Vec<Complex64> = (0..uhat.len())
            .map(|j| eh[j] * (uhat[j] + h * k1[j]))
            .collect();
        let k2 = self.nonlinear_hat(&a);
        let b: Vec<Complex64> = (0..uhat.len()).map(|j| eh[j] * uhat[j] + h * k2[j]).collect();
        let k3 = self.nonlinear_hat(&b);
        let c: Vec<Complex64> = (0..uhat.len())
            .map(|j| ef[j] * uhat[j] + self.dt * eh[j] * k3[j])
            .collect();
        let k4 = self.nonlinear_hat(&c);
        let s = self.dt / 6.0;
        for j in 0..uhat.len() {
            uhat[j] = ef[j] * uhat[j] + s * (ef[j] * k1[j] + 2.0 * eh[j] * (k2[j] + k3[j]) + k4[j]);
        }
    }

    /// Advance `f` by one step; non-finite output is reported as blow-up.
    pub fn step(&self, f: &mut GridField) -> Result<()> {
        let mut hat = f.samples.clone();
        self.sp.forward(&mut hat);
        self.step_hat(&mut hat);
        self.sp.inverse(&mut hat);
        f.samples = hat;
        f.t += self.dt;
        if !f.is_finite() {
            return Err(Error::BlowUp {
                t: f.t,
                max_gradient: f64::INFINITY,
            });
        }
        Ok(())
    }
}

/// One step of size `dt` with a throwaway stepper.
pub fn step(f: &GridField, dt: f64, sigma: f64) -> Result<GridField> {
    let ev = Evolver::new(f.grid(), sigma, dt)?;
    let mut g = f.clone();
    ev.step(&mut g)?;
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub t_end: f64,
    pub dt: f64,
    pub sigma: f64,
    /// Steps between trace samples and observer calls.
    pub sample_every: usize,
    pub nonlinear: bool,
}

/// Result of [`evolve`]; `blow_up` is set when the run stopped early.
#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub field: GridField,
    pub trace: InvariantTrace,
    pub blow_up: Option<(f64, f64)>,
}

/// Gradient growth factor treated as blow-up.
pub const BLOW_UP_FACTOR: f64 = 1e6;

/// Step from `f.t` to `t_end`, sampling invariants and calling `observer` at
/// `t = f.t` and every `sample_every` steps after. An observer error aborts
/// the run.
pub fn evolve<O>(f: GridField, opts: &EvolveOptions, mut observer: O) -> Result<EvolveOutcome>
where
    O: FnMut(&GridField, &Invariants) -> Result<()>,
{
    let mut ev = Evolver::new(f.grid(), opts.sigma, opts.dt)?;
    if !opts.nonlinear {
        ev = ev.linear_only();
    }
    let every = opts.sample_every.max(1);
    let t0 = f.t;
    let steps = ((opts.t_end - t0) / opts.dt).round().max(0.0) as usize;
    let mut field = f;
    let mut trace = InvariantTrace::default();
    let inv0 = invariants_with(&ev.sp, &field.samples, opts.sigma);
    let g0 = inv0.max_gradient;
    trace.push(field.t, &inv0);
    observer(&field, &inv0)?;
    let mut hat = field.samples.clone();
    ev.sp.forward(&mut hat);
    for i in 1..=steps {
        ev.step_hat(&mut hat);
        if i % every != 0 && i != steps {
            continue;
        }
        field.samples.copy_from_slice(&hat);
        ev.sp.inverse(&mut field.samples);
        field.t = t0 + i as f64 * opts.dt;
        if !field.is_finite() {
            return Ok(EvolveOutcome {
                field,
                trace,
                blow_up: Some((t0 + i as f64 * opts.dt, f64::INFINITY)),
            });
        }
        let inv = invariants_with(&ev.sp, &field.samples, opts.sigma);
        trace.push(field.t, &inv);
        if g0 > 0.0 && inv.max_gradient > BLOW_UP_FACTOR * g0 {
            return Ok(EvolveOutcome {
                field,
                trace,
                blow_up: Some((t0 + i as f64 * opts.dt, inv.max_gradient)),
            });
        }
        observer(&field, &inv)?;
    }
    Ok(EvolveOutcome {
        field,
        trace,
        blow_up: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_fixed() {
        let g = Grid::new(256, 20.0).unwrap();
        let f = GridField::zeros(g);
        let out = step(&f, 1e-3, 1.3).unwrap();
        assert!(out.samples.iter().all(|z| z.norm() == 0.0));
        let inv = grid_invariants(&out, 1.3);
        assert_eq!((inv.mass, inv.momentum, inv.energy, inv.h1), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn free_gaussian_matches_exact() {
        let g = Grid::new(512, 80.0).unwrap();
        let exact = |t: f64, x: f64| {
            let s = Complex64::new(1.0, 4.0 * t);
            (-x * x / s).exp() / s.sqrt()
        };
        let f = GridField::from_fn(g, 0.0, |x| exact(0.0, x));
        let opts = EvolveOptions {
            t_end: 1.0,
            dt: 0.01,
            sigma: 1.0,
            sample_every: 100,
            nonlinear: false,
        };
        let out = evolve(f, &opts, |_, _| Ok(())).unwrap();
        let err = (0..g.n)
            .map(|j| (out.field.samples[j] - exact(1.0, g.x(j))).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn real_even_field_has_no_momentum() {
        let g = Grid::new(256, 30.0).unwrap();
        let f = GridField::from_fn(g, 0.0, |x| Complex64::new((-x * x).exp(), 0.0));
        assert!(grid_invariants(&f, 1.5).momentum.abs() < 1e-12);
    }

    #[test]
    fn nonlinear_spectrum_is_truncated() {
        let g = Grid::new(256, 20.0).unwrap();
        let ev = Evolver::new(g, 1.4, 1e-3).unwrap();
        let mut hat: Vec<Complex64> = g
            .positions()
            .iter()
            .map(|&x| Complex64::new((-x * x).exp(), 0.3 * x * (-x * x).exp()))
            .collect();
        ev.spectral().forward(&mut hat);
        let n = ev.nonlinear_hat(&hat);
        for (j, z) in n.iter().enumerate() {
            if !ev.spectral().keeps_mode(j) {
                assert_eq!(*z, Complex64::new(0.0, 0.0));
            }
        }
    }
}
