//! Action functionals, weighted virial rates, the localized monotonicity
//! family and the quadratic form `H` of a modulated remainder.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolver::invariants_with;
use crate::grid::{Grid, GridField, Spectral};
use crate::modulation::ModulationState;
use crate::soliton::{
    conserved_of_soliton, sample_soliton, sample_soliton_derivative, SolitonParams,
};

/// `φ(x) = ½(1 + tanh x)` and its first three derivatives.
pub fn weight_phi(x: f64) -> [f64; 4] {
    let t = x.tanh();
    let s = 1.0 / x.cosh();
    let s2 = s * s;
    [
        0.5 * (1.0 + t),
        0.5 * s2,
        -s2 * t,
        s2 * (2.0 * t * t - s2),
    ]
}

/// Weight `g(x)` used by the virial identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Weight {
    Constant,
    /// `φ(sign·(x − center)/scale)`
    Tanh { center: f64, scale: f64, sign: f64 },
}

impl Weight {
    /// `(g, g′, g″, g‴)` at `x`.
    pub fn eval(&self, x: f64) -> [f64; 4] {
        match *self {
            Weight::Constant => [1.0, 0.0, 0.0, 0.0],
            Weight::Tanh {
                center,
                scale,
                sign,
            } => {
                let f = weight_phi(sign * (x - center) / scale);
                let a = sign / scale;
                [f[0], a * f[1], a * a * f[2], a * a * a * f[3]]
            }
        }
    }

    fn sample(&self, grid: Grid, order: usize) -> Vec<f64> {
        (0..grid.n).map(|j| self.eval(grid.x(j))[order]).collect()
    }
}

/// Pointwise densities of a field.
struct Densities {
    rho: Vec<f64>,
    /// `Im(ū u_x)`
    mom: Vec<f64>,
    kin: Vec<f64>,
    /// `|u|^{2σ} Im(ū u_x)`
    nl: Vec<f64>,
    /// `|u|^{2σ+2}`
    pot: Vec<f64>,
    dx: f64,
}

impl Densities {
    fn new(sp: &Spectral, u: &[Complex64], sigma: f64) -> Self {
        let ux = sp.derivative(u);
        let n = u.len();
        let mut d = Densities {
            rho: Vec::with_capacity(n),
            mom: Vec::with_capacity(n),
            kin: Vec::with_capacity(n),
            nl: Vec::with_capacity(n),
            pot: Vec::with_capacity(n),
            dx: sp.dx(),
        };
        for (a, b) in u.iter().zip(&ux) {
            let rho = a.norm_sqr();
            let im = (a.conj() * b).im;
            let rs = if rho > 0.0 { rho.powf(sigma) } else { 0.0 };
            d.rho.push(rho);
            d.mom.push(im);
            d.kin.push(b.norm_sqr());
            d.nl.push(rs * im);
            d.pot.push(rs * rho);
        }
        d
    }

    fn weighted(&self, v: &[f64], w: &[f64]) -> f64 {
        v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() * self.dx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
    /// `S = E + ωM + cP`
    pub s: f64,
    /// `K = d/dλ S(λu)` at `λ = 1`
    pub k: f64,
}

/// `S_{ω,c}(u)` and `K_{ω,c}(u)`. The quadratic parts of `S` are
/// homogeneous of degree 2 and the nonlinear part of degree `2σ+2`.
pub fn action_functionals(u: &GridField, p: &SolitonParams) -> Action {
    let sp = Spectral::new(u.grid());
    let inv = invariants_with(&sp, &u.samples, p.sigma);
    let d = Densities::new(&sp, &u.samples, p.sigma);
    let nl = d.nl.iter().sum::<f64>() * d.dx;
    let s = inv.energy + p.omega * inv.mass + p.c * inv.momentum;
    let k = 2.0 * s + nl * p.sigma / (p.sigma + 1.0);
    Action {
        mass: inv.mass,
        momentum: inv.momentum,
        energy: inv.energy,
        s,
        k,
    }
}

/// Right-hand sides of the weighted mass and momentum identities:
/// `d/dt ∫|u|²g = 2 Im∫ū u_x g′ + (σ+1)^{-1} ∫|u|^{2σ+2} g′` and
/// `−d/dt Im∫ū u_x g = −2∫|u_x|² g′ − Im∫|u|^{2σ} ū u_x g′ + ½∫|u|² g‴`.
pub fn virial_rates(u: &GridField, g: &Weight, sigma: f64) -> (f64, f64) {
    let sp = Spectral::new(u.grid());
    let d = Densities::new(&sp, &u.samples, sigma);
    let grid = u.grid();
    let g1 = g.sample(grid, 1);
    let g3 = g.sample(grid, 3);
    let rate_mass = 2.0 * d.weighted(&d.mom, &g1) + d.weighted(&d.pot, &g1) / (sigma + 1.0);
    let rate_momentum = -2.0 * d.weighted(&d.kin, &g1) - d.weighted(&d.nl, &g1)
        + 0.5 * d.weighted(&d.rho, &g3);
    (rate_mass, rate_momentum)
}

/// `(∫|u|²g, Im∫ū u_x g)`, the quantities whose rates [`virial_rates`]
/// returns.
pub fn weighted_mass_momentum(u: &GridField, g: &Weight, sigma: f64) -> (f64, f64) {
    let sp = Spectral::new(u.grid());
    let d = Densities::new(&sp, &u.samples, sigma);
    let w = g.sample(u.grid(), 0);
    (d.weighted(&d.rho, &w), d.weighted(&d.mom, &w))
}

/// Decay rates entering the two-soliton estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thetas {
    pub theta0: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub theta4: f64,
}

impl Thetas {
    pub fn new(p1: &SolitonParams, p2: &SolitonParams, mu: f64) -> Self {
        let (k1, k2) = (p1.kappa, p2.kappa);
        let (c1, c2) = (p1.c, p2.c);
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            theta0: min(&[k1 / 128.0, k2 / 128.0, c2 - c1, 2.0 * c2 - 2.0 * mu, mu - 2.0 * c1]),
            theta1: min(&[k1 / 8.0, k2 / 8.0]),
            theta2: min(&[k1 / 8.0, k2 / 8.0, c2 - c1]),
            theta3: min(&[k1 / 64.0, k2 / 64.0, 4.0 * (mu - c1), 4.0 * (c2 - mu)]),
            theta4: min(&[k1 / 64.0, k2 / 64.0, mu - 2.0 * c1, 4.0 * c2 - 2.0 * mu]),
        }
    }
}

/// Parameters of the localized functionals, fixed at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityConfig {
    pub xbar0: f64,
    /// `2Δω/Δc`
    pub mu: f64,
    /// `4Δω/Δc`, the speed of the `(+,0)` and `(0,−)` lines
    pub mu_fast: f64,
    /// `Δω/Δc`, the speed of the `(−,0)` and `(0,+)` lines
    pub mu_slow: f64,
    /// `L²/64`
    pub a: f64,
    pub l: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub c1: f64,
    pub c2: f64,
    pub thetas: Thetas,
}

impl MonotonicityConfig {
    pub fn new(p1: &SolitonParams, p2: &SolitonParams, x1: f64, x2: f64, l: f64) -> Result<Self> {
        let dc = p2.c - p1.c;
        if dc == 0.0 {
            return Err(Error::DegeneratePair(p1.c));
        }
        if !(l > 0.0) {
            return Err(Error::Domain(format!("separation L = {l} must be positive")));
        }
        let r = (p2.omega - p1.omega) / dc;
        let mu = 2.0 * r;
        Ok(Self {
            xbar0: 0.5 * (x1 + x2),
            mu,
            mu_fast: 4.0 * r,
            mu_slow: r,
            a: l * l / 64.0,
            l,
            omega1: p1.omega,
            omega2: p2.omega,
            c1: p1.c,
            c2: p2.c,
            thetas: Thetas::new(p1, p2, mu),
        })
    }

    /// From a two-wave modulation state at `t = 0`, with `L = x₂ − x₁`.
    pub fn from_state(s: &ModulationState) -> Result<Self> {
        if s.k != 2 {
            return Err(Error::Domain(format!("expected 2 waves, got {}", s.k)));
        }
        Self::new(&s.params(0)?, &s.params(1)?, s.x(0), s.x(1), s.x(1) - s.x(0))
    }

    /// `φ((x − x̄⁰ − speed·t)/√(t+a))`.
    pub fn weight(&self, speed: f64, t: f64) -> Weight {
        Weight::Tanh {
            center: self.xbar0 + speed * t,
            scale: (t + self.a).sqrt(),
            sign: 1.0,
        }
    }

    pub fn d_omega(&self) -> f64 {
        self.omega2 - self.omega1
    }

    pub fn d_c(&self) -> f64 {
        self.c2 - self.c1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JFamily {
    pub j_sum: f64,
    pub j: f64,
    pub j_p0: f64,
    pub j_m0: f64,
    pub j_0p: f64,
    pub j_0m: f64,
}

impl JFamily {
    /// The five localized functionals audited for monotonicity.
    pub fn audited(&self) -> [f64; 5] {
        [self.j, self.j_p0, self.j_m0, self.j_0p, self.j_0m]
    }
}

pub const AUDITED_NAMES: [&str; 5] = ["J", "J_+0", "J_-0", "J_0+", "J_0-"];

/// The monotonicity family at time `t`.
pub fn j_family(u: &GridField, cfg: &MonotonicityConfig, t: f64) -> JFamily {
    let sp = Spectral::new(u.grid());
    // σ only enters the nonlinear densities, which are not used here
    let d = Densities::new(&sp, &u.samples, 1.0);
    let grid = u.grid();
    let pair = |speed: f64| {
        let w = cfg.weight(speed, t).sample(grid, 0);
        (d.weighted(&d.rho, &w), d.weighted(&d.mom, &w))
    };
    let (dw, dc) = (cfg.d_omega(), cfg.d_c());
    let (m, p) = pair(cfg.mu);
    let (mf, pf) = pair(cfg.mu_fast);
    let (ms, ps) = pair(cfg.mu_slow);
    let total_m = d.rho.iter().sum::<f64>() * d.dx;
    let total_p = d.mom.iter().sum::<f64>() * d.dx;
    let j = 0.5 * dw * m - 0.5 * dc * p;
    // soliton 1 carries 1 − φ, soliton 2 carries φ
    let j_sum = 0.5 * cfg.omega1 * (total_m - m) - 0.5 * cfg.c1 * (total_p - p)
        + 0.5 * cfg.omega2 * m
        - 0.5 * cfg.c2 * p;
    JFamily {
        j_sum,
        j,
        j_p0: dw * mf - 0.5 * dc * pf,
        j_m0: 0.25 * dw * ms - 0.5 * dc * ps,
        j_0p: 0.5 * dw * ms - dc * ps,
        j_0m: 0.5 * dw * mf - 0.25 * dc * pf,
    }
}

/// `J_sum − (ω₁(0)/2 ∫|u|² − c₁(0)/2 Im∫ū u_x) − J`, zero up to rounding.
pub fn split_defect(u: &GridField, cfg: &MonotonicityConfig, t: f64) -> f64 {
    let f = j_family(u, cfg, t);
    let sp = Spectral::new(u.grid());
    let d = Densities::new(&sp, &u.samples, 1.0);
    let m = d.rho.iter().sum::<f64>() * d.dx;
    let p = d.mom.iter().sum::<f64>() * d.dx;
    f.j_sum - (0.5 * cfg.omega1 * m - 0.5 * cfg.c1 * p) - f.j
}

/// One checkpoint of an audited run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditSample {
    pub t: f64,
    pub family: JFamily,
    pub h1_eps: f64,
}

/// Constants of `J(t) − J(0) ≤ A/L · sup‖ε‖²_{H¹} + B e^{−θL}` per audited
/// functional (θ₃ for `J`, θ₄ for the four variants).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditBounds {
    pub a: [f64; 5],
    pub b: [f64; 5],
}

fn decay(cfg: &MonotonicityConfig, idx: usize) -> f64 {
    let th = if idx == 0 {
        cfg.thetas.theta3
    } else {
        cfg.thetas.theta4
    };
    (-th * cfg.l).exp()
}

/// `(ΔJ_•(t), sup_{s≤t} ‖ε(s)‖²)` at every checkpoint.
fn increments(samples: &[AuditSample]) -> Vec<([f64; 5], f64)> {
    let Some(first) = samples.first() else {
        return Vec::new();
    };
    let j0 = first.family.audited();
    let mut sup = 0.0f64;
    samples
        .iter()
        .map(|s| {
            sup = sup.max(s.h1_eps * s.h1_eps);
            let j = s.family.audited();
            let mut d = [0.0; 5];
            for i in 0..5 {
                d[i] = j[i] - j0[i];
            }
            (d, sup)
        })
        .collect()
}

/// Fit `(A, B)`: `B` from the runs' largest increment at vanishing
/// remainder scale, then `A` from what is left, both scaled by `safety`.
/// `floor` is a relative noise level below which increments are ignored.
pub fn calibrate_bounds(
    runs: &[&[AuditSample]],
    cfg: &MonotonicityConfig,
    safety: f64,
    floor: f64,
) -> AuditBounds {
    let mut a = [0.0; 5];
    let mut b = [0.0; 5];
    for i in 0..5 {
        let e = decay(cfg, i);
        let scale = runs
            .iter()
            .filter_map(|r| r.first())
            .map(|s| s.family.audited()[i].abs())
            .fold(0.0, f64::max);
        let noise = floor * scale.max(1.0);
        let mut bmax = noise / e;
        let all: Vec<Vec<([f64; 5], f64)>> = runs.iter().map(|r| increments(r)).collect();
        // the run with the smallest remainder fixes B
        let clean = all
            .iter()
            .min_by(|x, y| {
                let sx = x.last().map(|v| v.1).unwrap_or(0.0);
                let sy = y.last().map(|v| v.1).unwrap_or(0.0);
                sx.total_cmp(&sy)
            })
            .cloned()
            .unwrap_or_default();
        for (d, _) in &clean {
            bmax = bmax.max(d[i] / e);
        }
        let mut amax = 0.0f64;
        for run in &all {
            for (d, sup) in run {
                let excess = d[i] - bmax * e;
                if excess > 0.0 && *sup > 0.0 {
                    amax = amax.max(cfg.l * excess / sup);
                }
            }
        }
        a[i] = safety * amax;
        b[i] = safety * bmax;
    }
    AuditBounds { a, b }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub functional: String,
    pub t: f64,
    pub increment: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub names: Vec<String>,
    /// `max_t ΔJ_•(t) / bound_•(t)` per functional.
    pub worst_ratio: Vec<f64>,
    pub max_increment: Vec<f64>,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the forward one-sided bounds at every checkpoint.
pub fn monotonicity_audit(
    samples: &[AuditSample],
    cfg: &MonotonicityConfig,
    bounds: &AuditBounds,
) -> AuditReport {
    let inc = increments(samples);
    let mut worst = vec![f64::NEG_INFINITY; 5];
    let mut max_inc = vec![f64::NEG_INFINITY; 5];
    let mut violations = Vec::new();
    for (s, (d, sup)) in samples.iter().zip(&inc) {
        for i in 0..5 {
            let bound = bounds.a[i] / cfg.l * sup + bounds.b[i] * decay(cfg, i);
            max_inc[i] = max_inc[i].max(d[i]);
            if bound > 0.0 {
                worst[i] = worst[i].max(d[i] / bound);
            }
            if d[i] > bound {
                violations.push(Violation {
                    functional: AUDITED_NAMES[i].to_string(),
                    t: s.t,
                    increment: d[i],
                    bound,
                });
            }
        }
    }
    AuditReport {
        names: AUDITED_NAMES.iter().map(|s| s.to_string()).collect(),
        worst_ratio: worst,
        max_increment: max_inc,
        violations,
    }
}

/// `S(t) = E(u) + J_sum(u)` and the quadratic form
/// `H = ½∫|ε_x|² + Σ_k [ω_k/2 ∫|ε|² w_k − c_k/2 Im∫ε̄ε_x w_k] + ½N(ε)` with
/// `w₁ = 1 − φ`, `w₂ = φ` and
/// `N(ε) = Σ_k Im∫|R_k|^{2σ} ε̄ε_x + σ Im∫|R_k|^{2σ−2}(R̄_k ∂xR_k |ε|² + R_k ∂xR_k ε̄²)`.
pub fn localized_action_and_h(
    u: &GridField,
    cfg: &MonotonicityConfig,
    state: &ModulationState,
    t: f64,
) -> Result<(f64, f64)> {
    if state.k != 2 {
        return Err(Error::Domain(format!("expected 2 waves, got {}", state.k)));
    }
    let sigma = state.sigma;
    let grid = u.grid();
    let sp = Spectral::new(grid);
    let inv = invariants_with(&sp, &u.samples, sigma);
    let s_loc = inv.energy + j_family(u, cfg, t).j_sum;

    let eps = &state.epsilon.samples;
    let ex = sp.derivative(eps);
    let phi = cfg.weight(cfg.mu, t).sample(grid, 0);
    let dx = grid.dx();
    let mut h = 0.0;
    for j in 0..grid.n {
        let rho = eps[j].norm_sqr();
        let m = (eps[j].conj() * ex[j]).im;
        let w2 = phi[j];
        let w1 = 1.0 - w2;
        h += 0.5 * ex[j].norm_sqr()
            + 0.5 * (state.omega(0) * w1 + state.omega(1) * w2) * rho
            - 0.5 * (state.c(0) * w1 + state.c(1) * w2) * m;
    }
    let mut n_eps = 0.0;
    for k in 0..2 {
        let p = state.params(k)?;
        let r = sample_soliton(&p, grid, state.x(k), state.gamma(k));
        let rx = sample_soliton_derivative(&p, grid, state.x(k), state.gamma(k));
        for j in 0..grid.n {
            let rr = r[j].norm_sqr();
            if rr == 0.0 {
                continue;
            }
            let e = eps[j];
            let m = (e.conj() * ex[j]).im;
            let mix = r[j].conj() * rx[j] * e.norm_sqr() + r[j] * rx[j] * e.conj() * e.conj();
            n_eps += rr.powf(sigma) * m + sigma * rr.powf(sigma - 1.0) * mix.im;
        }
    }
    h += 0.5 * n_eps;
    Ok((s_loc, h * dx))
}

/// Localized masses and momenta against the closed-form values of the
/// modulated waves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizedComparison {
    pub mass: [f64; 2],
    pub momentum: [f64; 2],
    pub mass_exact: [f64; 2],
    pub momentum_exact: [f64; 2],
    /// `|M̂_k − M(R_k)|` and `|P̂_k − P(R_k)|`, ordered `(M₁, M₂, P₁, P₂)`.
    pub differences: [f64; 4],
}

pub fn localized_mass_momentum(
    u: &GridField,
    state: &ModulationState,
    cfg: &MonotonicityConfig,
    t: f64,
) -> Result<LocalizedComparison> {
    let sp = Spectral::new(u.grid());
    let d = Densities::new(&sp, &u.samples, state.sigma);
    let phi = cfg.weight(cfg.mu, t).sample(u.grid(), 0);
    let one_minus: Vec<f64> = phi.iter().map(|v| 1.0 - v).collect();
    let mass = [
        0.5 * d.weighted(&d.rho, &one_minus),
        0.5 * d.weighted(&d.rho, &phi),
    ];
    let momentum = [
        -0.5 * d.weighted(&d.mom, &one_minus),
        -0.5 * d.weighted(&d.mom, &phi),
    ];
    let c1 = conserved_of_soliton(&state.params(0)?)?;
    let c2 = conserved_of_soliton(&state.params(1)?)?;
    let mass_exact = [c1.mass, c2.mass];
    let momentum_exact = [c1.momentum, c2.momentum];
    Ok(LocalizedComparison {
        mass,
        momentum,
        mass_exact,
        momentum_exact,
        differences: [
            (mass[0] - mass_exact[0]).abs(),
            (mass[1] - mass_exact[1]).abs(),
            (momentum[0] - momentum_exact[0]).abs(),
            (momentum[1] - momentum_exact[1]).abs(),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_symmetry_and_derivatives() {
        assert_eq!(weight_phi(0.0)[0], 0.5);
        for &x in &[-3.0, -0.7, 0.2, 1.5, 4.0] {
            let f = weight_phi(x);
            assert!((weight_phi(-x)[0] - (1.0 - f[0])).abs() < 1e-15);
            let h = 1e-5;
            for order in 0..3 {
                let fd = (weight_phi(x + h)[order] - weight_phi(x - h)[order]) / (2.0 * h);
                assert!((fd - f[order + 1]).abs() < 1e-9, "x = {x}, order {order}");
            }
        }
        assert!(weight_phi(800.0).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn zero_field_gives_zero_functionals() {
        let grid = Grid::new(256, 40.0).unwrap();
        let u = GridField::zeros(grid);
        let p1 = SolitonParams::new(1.2, 4.0, -1.0).unwrap();
        let p2 = SolitonParams::new(1.2, 4.4, 1.0).unwrap();
        let cfg = MonotonicityConfig::new(&p1, &p2, -10.0, 10.0, 20.0).unwrap();
        assert_eq!(j_family(&u, &cfg, 0.0), JFamily::default());
        let a = action_functionals(&u, &p1);
        assert_eq!((a.s, a.k), (0.0, 0.0));
    }

    #[test]
    fn constant_weight_rates_vanish() {
        let grid = Grid::new(256, 40.0).unwrap();
        let u = GridField::from_fn(grid, 0.0, |x| {
            Complex64::from_polar((-x * x / 4.0).exp(), 0.4 * x)
        });
        let (a, b) = virial_rates(&u, &Weight::Constant, 1.3);
        assert_eq!((a, b), (0.0, 0.0));
    }

    #[test]
    fn thetas_for_reference_pair() {
        let p1 = SolitonParams::new(1.2, 4.0, -1.0).unwrap();
        let p2 = SolitonParams::new(1.2, 4.4, 1.0).unwrap();
        let cfg = MonotonicityConfig::new(&p1, &p2, -20.0, 20.0, 40.0).unwrap();
        assert!((cfg.mu - 0.4).abs() < 1e-12);
        assert!((cfg.a - 25.0).abs() < 1e-12);
        assert!(cfg.mu_slow < cfg.mu && cfg.mu < cfg.mu_fast);
        assert!((cfg.thetas.theta2 - 15f64.sqrt() / 8.0).abs() < 1e-12);
        assert!((cfg.thetas.theta3 - 15f64.sqrt() / 64.0).abs() < 1e-12);
    }
}
