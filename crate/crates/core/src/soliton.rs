//! Closed-form solitary waves `Q_{ω,c}` and their conserved quantities.
//!
//! The amplitude is
//! `Φ(x) = [ (σ+1)κ² / (2√ω (cosh(σκx) − c/(2√ω))) ]^{1/(2σ)}` with
//! `κ = √(4ω − c²)`, and the field carries the phase
//! `c x / 2 − (2σ+2)^{-1} ∫_{-∞}^x Φ^{2σ}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Spectral};
use crate::numerics::{integrate_breaks, QuadOptions};

/// Identity of one solitary wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonParams {
    pub sigma: f64,
    pub omega: f64,
    pub c: f64,
    pub kappa: f64,
}

impl SolitonParams {
    pub fn new(sigma: f64, omega: f64, c: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::SigmaRange(sigma));
        }
        let disc = 4.0 * omega - c * c;
        if !(disc.is_finite() && disc > 0.0 && omega > 0.0) {
            return Err(Error::ParameterDomain { omega, c, disc });
        }
        Ok(Self {
            sigma,
            omega,
            c,
            kappa: disc.sqrt(),
        })
    }

    /// Same exponent, different `(ω, c)`.
    pub fn with(&self, omega: f64, c: f64) -> Result<Self> {
        Self::new(self.sigma, omega, c)
    }

    /// Criterion-dependent quantities need `σ ∈ (1, 2)`.
    pub fn require_criterion_range(&self) -> Result<()> {
        if self.sigma > 1.0 && self.sigma < 2.0 {
            Ok(())
        } else {
            Err(Error::SigmaRange(self.sigma))
        }
    }

    /// `c / (2√ω)`, strictly inside (-1, 1).
    fn b(&self) -> f64 {
        self.c / (2.0 * self.omega.sqrt())
    }

    /// Prefactor `(σ+1)κ² / (2√ω)` of `Φ^{2σ}`.
    fn amplitude(&self) -> f64 {
        (self.sigma + 1.0) * self.kappa * self.kappa / (2.0 * self.omega.sqrt())
    }

    /// Length beyond which `Φ²` is below `e^{-50}` of its peak scale.
    pub fn decay_length(&self) -> f64 {
        50.0 / self.kappa
    }
}

/// `ln(cosh z − b)` for `z >= 0`, stable for large `z` and for `b` near 1.
fn ln_cosh_minus(z: f64, b: f64) -> f64 {
    if z > 20.0 {
        let e = (-z).exp();
        z - std::f64::consts::LN_2 + (e * e - 2.0 * b * e).ln_1p()
    } else {
        let s = (0.5 * z).sinh();
        ((1.0 - b) + 2.0 * s * s).ln()
    }
}

/// `sinh z / (cosh z − b)` for `z >= 0`.
fn sinh_over_cosh_minus(z: f64, b: f64) -> f64 {
    if z > 20.0 {
        let e = (-z).exp();
        (1.0 - e * e) / (1.0 + e * e - 2.0 * b * e)
    } else {
        let s = (0.5 * z).sinh();
        z.sinh() / ((1.0 - b) + 2.0 * s * s)
    }
}

/// Amplitude `Φ_{ω,c}(x)`.
pub fn phi_profile(p: &SolitonParams, x: f64) -> f64 {
    let z = (p.sigma * p.kappa * x).abs();
    ((p.amplitude().ln() - ln_cosh_minus(z, p.b())) / (2.0 * p.sigma)).exp()
}

/// `∂xΦ` from the closed form.
pub fn phi_derivative(p: &SolitonParams, x: f64) -> f64 {
    let z = p.sigma * p.kappa * x;
    let ratio = sinh_over_cosh_minus(z.abs(), p.b()).copysign(z);
    -0.5 * p.kappa * phi_profile(p, x) * ratio
}

/// `∫_{-∞}^x Φ^{2σ}(y) dy` in closed form.
///
/// With `s = σκ`, `A = (σ+1)κ²/(2√ω)`, `b = c/(2√ω)` and
/// `k = √((1+b)/(1−b))`, an antiderivative of `A / (cosh(sy) − b)` is
/// `(2A / (s√(1−b²))) atan(k tanh(sy/2))`.
pub fn phase_integral(p: &SolitonParams, x: f64) -> f64 {
    if x > 0.0 {
        return phase_integral_total(p) - phase_integral(p, -x);
    }
    let b = p.b();
    let s = p.sigma * p.kappa;
    let k = ((1.0 + b) / (1.0 - b)).sqrt();
    let pre = 2.0 * p.amplitude() / (s * (1.0 - b * b).sqrt());
    // atan(k t) + atan(k) with t = tanh(sx/2) <= 0, combined so nothing cancels
    let z = s * x;
    let ez = z.exp();
    let t = (0.5 * z).tanh();
    let one_plus_t = 2.0 * ez / (1.0 + ez);
    pre * (k * one_plus_t / (1.0 - k * k * t)).atan()
}

/// `∫_ℝ Φ^{2σ}`.
pub fn phase_integral_total(p: &SolitonParams) -> f64 {
    let b = p.b();
    let s = p.sigma * p.kappa;
    let k = ((1.0 + b) / (1.0 - b)).sqrt();
    4.0 * p.amplitude() / (s * (1.0 - b * b).sqrt()) * k.atan()
}

fn phase(p: &SolitonParams, x: f64) -> f64 {
    0.5 * p.c * x - phase_integral(p, x) / (2.0 * p.sigma + 2.0)
}

/// `Q_{ω,c}(x)`.
pub fn soliton_field(p: &SolitonParams, x: f64) -> Complex64 {
    Complex64::from_polar(phi_profile(p, x), phase(p, x))
}

/// `∂xQ_{ω,c}(x) = (Φ' + iΦ(c/2 − Φ^{2σ}/(2σ+2))) e^{iθ}`.
pub fn soliton_derivative(p: &SolitonParams, x: f64) -> Complex64 {
    let phi = phi_profile(p, x);
    let dphi = phi_derivative(p, x);
    let twist = 0.5 * p.c - phi.powf(2.0 * p.sigma) / (2.0 * p.sigma + 2.0);
    Complex64::new(dphi, phi * twist) * Complex64::from_polar(1.0, phase(p, x))
}

/// `Q(x − x0) e^{iγ}` on a periodic grid, displacement taken as the
/// minimal periodic image.
pub fn sample_soliton(p: &SolitonParams, grid: Grid, x0: f64, gamma: f64) -> Vec<Complex64> {
    let rot = Complex64::from_polar(1.0, gamma);
    (0..grid.n)
        .map(|j| soliton_field(p, grid.periodic_offset(grid.x(j), x0)) * rot)
        .collect()
}

/// `∂xQ(x − x0) e^{iγ}` on a periodic grid.
pub fn sample_soliton_derivative(
    p: &SolitonParams,
    grid: Grid,
    x0: f64,
    gamma: f64,
) -> Vec<Complex64> {
    let rot = Complex64::from_polar(1.0, gamma);
    (0..grid.n)
        .map(|j| soliton_derivative(p, grid.periodic_offset(grid.x(j), x0)) * rot)
        .collect()
}

/// Moment integrals of the amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonMoments {
    /// `∫Φ²`
    pub i2: f64,
    /// `∫Φ^{2σ+2}`
    pub i2s2: f64,
    /// `∫Φ^{4σ+2}`
    pub i4s2: f64,
    /// `∫(∂xΦ)²`
    pub dkin: f64,
}

fn even_integral<F: Fn(f64) -> f64>(p: &SolitonParams, f: F, opts: QuadOptions) -> Result<f64> {
    let w = 1.0 / p.kappa;
    let breaks = [0.0, w, 4.0 * w, 12.0 * w, 25.0 * w, p.decay_length()];
    Ok(2.0 * integrate_breaks(f, &breaks, opts)?.value)
}

/// Adaptive quadrature of the four moments.
pub fn soliton_moments(p: &SolitonParams) -> Result<SolitonMoments> {
    soliton_moments_with(p, QuadOptions::default())
}

pub fn soliton_moments_with(p: &SolitonParams, opts: QuadOptions) -> Result<SolitonMoments> {
    let s = p.sigma;
    let m = SolitonMoments {
        i2: even_integral(p, |x| phi_profile(p, x).powi(2), opts)?,
        i2s2: even_integral(p, |x| phi_profile(p, x).powf(2.0 * s + 2.0), opts)?,
        i4s2: even_integral(p, |x| phi_profile(p, x).powf(4.0 * s + 2.0), opts)?,
        dkin: even_integral(p, |x| phi_derivative(p, x).powi(2), opts)?,
    };
    Ok(m)
}

/// Mass, momentum and energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conserved {
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
}

impl Conserved {
    pub fn from_moments(p: &SolitonParams, m: &SolitonMoments) -> Self {
        let s2 = 2.0 * p.sigma + 2.0;
        let c = p.c;
        let mass = 0.5 * m.i2;
        // Im ∫ Q̄ Q_x = c/2 ∫Φ² − ∫Φ^{2σ+2}/(2σ+2)
        let im_qqx = 0.5 * c * m.i2 - m.i2s2 / s2;
        let momentum = -0.5 * im_qqx;
        let kinetic = m.dkin + 0.25 * c * c * m.i2 + m.i4s2 / (s2 * s2) - c / s2 * m.i2s2;
        // Im ∫ |Q|^{2σ} Q̄ Q_x = c/2 ∫Φ^{2σ+2} − ∫Φ^{4σ+2}/(2σ+2)
        let im_nonlin = 0.5 * c * m.i2s2 - m.i4s2 / s2;
        let energy = 0.5 * kinetic + im_nonlin / s2;
        Self {
            mass,
            momentum,
            energy,
        }
    }
}

/// `(M, P, E)(Q_{ω,c})` from the moment reductions.
pub fn conserved_of_soliton(p: &SolitonParams) -> Result<Conserved> {
    let m = soliton_moments(p)?;
    Ok(Conserved::from_moments(p, &m))
}

/// `‖∂xQ‖²_{L²}` from the moments.
pub fn kinetic_norm_sq(p: &SolitonParams, m: &SolitonMoments) -> f64 {
    let s2 = 2.0 * p.sigma + 2.0;
    m.dkin + 0.25 * p.c * p.c * m.i2 + m.i4s2 / (s2 * s2) - p.c / s2 * m.i2s2
}

/// Check that a grid resolves the soliton well enough for the gradient and
/// residual routines: `κ L ≥ 40` and at least 16 points per `max(1, 1/κ)`.
pub fn check_resolution(p: &SolitonParams, grid: Grid) -> Result<()> {
    if p.kappa * grid.l_dom < 40.0 {
        return Err(Error::Resolution(format!(
            "kappa * l_dom = {:.2} < 40",
            p.kappa * grid.l_dom
        )));
    }
    let scale = (1.0 / p.kappa).max(1.0);
    if grid.dx() > scale / 16.0 {
        return Err(Error::Resolution(format!(
            "only {:.1} points per length {scale:.3}",
            scale / grid.dx()
        )));
    }
    Ok(())
}

/// Central finite differences of `Q` in `ω` and `c` at the grid points
/// (soliton centered at 0), step `h = 1e-5 max(1, |ω|)`.
pub fn soliton_param_gradients(
    p: &SolitonParams,
    grid: Grid,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    param_gradients_at(p, grid, 0.0, 0.0, 1e-5 * p.omega.abs().max(1.0))
}

/// Parameter gradients of `Q(x − x0) e^{iγ}` with an explicit base step.
pub fn param_gradients_at(
    p: &SolitonParams,
    grid: Grid,
    x0: f64,
    gamma: f64,
    step: f64,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let d_omega = central_difference(p, grid, x0, gamma, step, |p, h| {
        Ok((p.with(p.omega + h, p.c)?, p.with(p.omega - h, p.c)?))
    })?;
    let d_c = central_difference(p, grid, x0, gamma, step, |p, h| {
        Ok((p.with(p.omega, p.c + h)?, p.with(p.omega, p.c - h)?))
    })?;
    Ok((d_omega, d_c))
}

fn central_difference<F>(
    p: &SolitonParams,
    grid: Grid,
    x0: f64,
    gamma: f64,
    step: f64,
    perturb: F,
) -> Result<Vec<Complex64>>
where
    F: Fn(&SolitonParams, f64) -> Result<(SolitonParams, SolitonParams)>,
{
    let mut h = step;
    for _ in 0..=3 {
        if let Ok((plus, minus)) = perturb(p, h) {
            let up = sample_soliton(&plus, grid, x0, gamma);
            let dn = sample_soliton(&minus, grid, x0, gamma);
            return Ok(up
                .iter()
                .zip(&dn)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect());
        }
        h *= 0.1;
    }
    Err(Error::StepShrink(3))
}

/// Sup norm of `ωQ − Q_xx + icQ_x − i|Q|^{2σ}Q_x` with spectral derivatives.
pub fn stationary_residual(p: &SolitonParams, grid: Grid) -> Result<f64> {
    let q = sample_soliton(p, grid, 0.0, 0.0);
    let peak = q.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::Resolution("field vanishes identically".into()));
    }
    let edge = q[0].norm().max(q[grid.n - 1].norm());
    if edge > 1e-10 {
        return Err(Error::Resolution(format!(
            "boundary amplitude {edge:.3e} exceeds 1e-10"
        )));
    }
    let sp = Spectral::new(grid);
    let qx = sp.derivative(&q);
    let qxx = sp.second_derivative(&q);
    let i = Complex64::i();
    let res = q
        .iter()
        .zip(&qx)
        .zip(&qxx)
        .map(|((&u, &ux), &uxx)| {
            let rho_s = u.norm_sqr().powf(p.sigma);
            (p.omega * u - uxx + i * p.c * ux - i * rho_s * ux).norm()
        })
        .fold(0.0, f64::max);
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit() -> SolitonParams {
        SolitonParams::new(1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn rejects_outside_cone() {
        assert!(matches!(
            SolitonParams::new(1.2, 1.0, 2.0),
            Err(Error::ParameterDomain { .. })
        ));
        assert!(SolitonParams::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn kappa_matches_discriminant() {
        let p = SolitonParams::new(1.3, 2.5, -1.7).unwrap();
        assert!((p.kappa * p.kappa - (10.0 - 1.7 * 1.7)).abs() < 1e-14);
    }

    #[test]
    fn phi_at_origin_sigma_one() {
        assert_eq!(phi_profile(&unit(), 0.0), 2.0);
    }

    #[test]
    fn phi_matches_extended_precision() {
        // 40-digit evaluation of the closed form
        let p = SolitonParams::new(1.5, 2.0, 1.0).unwrap();
        let exact = 0.928_827_794_254_559_523_164_402_210_289_3;
        assert!((phi_profile(&p, 0.7) - exact).abs() < 1e-14 * exact);
    }

    #[test]
    fn phi_far_tail_is_finite() {
        let p = SolitonParams::new(1.9, 4.0, 1.0).unwrap();
        let v = phi_profile(&p, 400.0);
        assert!(v.is_finite() && v >= 0.0 && v < 1e-100);
    }

    #[test]
    fn phi_derivative_matches_fd() {
        let p = SolitonParams::new(1.2, 1.0, 0.3).unwrap();
        for &x in &[-3.0, -0.4, 0.0, 0.9, 5.0] {
            let h = 1e-5;
            let fd = (phi_profile(&p, x + h) - phi_profile(&p, x - h)) / (2.0 * h);
            assert!((fd - phi_derivative(&p, x)).abs() < 1e-8);
        }
    }

    #[test]
    fn phase_integral_limits() {
        let p = unit();
        assert!((phase_integral_total(&p) - 2.0 * PI).abs() < 1e-12);
        assert!((phase_integral(&p, 0.0) - PI).abs() < 1e-12);
        assert!(phase_integral(&p, -50.0 / p.kappa).abs() < 1e-12);
        assert!((phase_integral(&p, 60.0) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn phase_integral_matches_quadrature() {
        let p = SolitonParams::new(1.2, 1.0, 0.3).unwrap();
        // mpmath reference values at x = 0.3 and +inf
        assert!((phase_integral(&p, 0.3) - 4.542_673_668_892_095_660_96).abs() < 1e-12);
        assert!((phase_integral_total(&p) - 6.311_670_198_429_136_367_40).abs() < 1e-12);
        let f = |y: f64| phi_profile(&p, y).powf(2.0 * p.sigma);
        for &x in &[-4.0f64, -1.0, 0.5, 2.5] {
            let mut breaks: Vec<f64> = [-60.0, -10.0, -1.5].into_iter().filter(|&b| b < x).collect();
            breaks.push(x);
            let q = integrate_breaks(f, &breaks, QuadOptions::default()).unwrap().value;
            assert!((q - phase_integral(&p, x)).abs() < 1e-11, "x = {x}");
        }
    }

    #[test]
    fn field_at_origin_sigma_one() {
        // |Q(0)| = 2, phase −π/4 (from ∫_{-∞}^0 Φ² = π and 1/(2σ+2) = 1/4)
        let q = soliton_field(&unit(), 0.0);
        let expect = Complex64::from_polar(2.0, -PI / 4.0);
        assert!((q - expect).norm() < 1e-10);
    }

    #[test]
    fn derivative_matches_fd() {
        let p = SolitonParams::new(1.4, 1.3, -0.8).unwrap();
        for &x in &[-2.0, -0.1, 0.0, 0.7, 3.0] {
            let h = 1e-5;
            let fd = (soliton_field(&p, x + h) - soliton_field(&p, x - h)) / (2.0 * h);
            assert!((fd - soliton_derivative(&p, x)).norm() < 1e-8);
        }
    }

    #[test]
    fn moments_sigma_one() {
        let m = soliton_moments(&unit()).unwrap();
        assert!((m.i2 - 2.0 * PI).abs() < 1e-10);
        assert!((m.i2s2 - 16.0).abs() < 1e-10);
        assert!((m.i4s2 - 16.0 * PI).abs() < 1e-10);
        assert!((m.dkin - PI).abs() < 1e-10);
    }

    #[test]
    fn moments_stable_under_tighter_tolerance() {
        let p = SolitonParams::new(1.7, 3.0, 1.1).unwrap();
        let a = soliton_moments(&p).unwrap();
        let tight = QuadOptions {
            abs_tol: 1e-14,
            rel_tol: 1e-13,
            max_intervals: 20000,
        };
        let b = soliton_moments_with(&p, tight).unwrap();
        for (x, y) in [(a.i2, b.i2), (a.i2s2, b.i2s2), (a.i4s2, b.i4s2), (a.dkin, b.dkin)] {
            assert!(x > 0.0);
            assert!((x - y).abs() < 1e-12 * y);
        }
    }

    #[test]
    fn conserved_sigma_one() {
        let c = conserved_of_soliton(&unit()).unwrap();
        assert!((c.mass - PI).abs() < 1e-10);
        assert!((c.momentum - 2.0).abs() < 1e-10);
        assert!(c.energy.abs() < 1e-9);
    }

    #[test]
    fn stationary_residual_small() {
        let p = SolitonParams::new(1.2, 1.0, 0.3).unwrap();
        let coarse = stationary_residual(&p, Grid::new(2048, 80.0).unwrap()).unwrap();
        let fine = stationary_residual(&p, Grid::new(4096, 80.0).unwrap()).unwrap();
        assert!(fine <= 1e-8, "residual {fine}");
        assert!(fine <= coarse.max(1e-9), "{fine} vs {coarse}");
    }

    #[test]
    fn stationary_residual_rejects_truncated_domain() {
        let p = SolitonParams::new(1.2, 1.0, 0.3).unwrap();
        assert!(matches!(
            stationary_residual(&p, Grid::new(1024, 10.0).unwrap()),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn gradients_richardson_consistent() {
        let p = SolitonParams::new(1.2, 1.0, 0.3).unwrap();
        let grid = Grid::new(2048, 60.0).unwrap();
        let h = 1e-5;
        let (dw1, dc1) = param_gradients_at(&p, grid, 0.0, 0.0, h).unwrap();
        let (dw2, dc2) = param_gradients_at(&p, grid, 0.0, 0.0, h / 2.0).unwrap();
        let sp = Spectral::new(grid);
        for (a, b) in [(&dw1, &dw2), (&dc1, &dc2)] {
            let diff: Vec<Complex64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
            assert!(sp.l2_norm(&diff) < 1e-6 * sp.l2_norm(b));
        }
    }

    #[test]
    fn omega_gradient_even_when_at_rest() {
        let p = SolitonParams::new(1.3, 1.0, 0.0).unwrap();
        let grid = Grid::new(1024, 40.0).unwrap();
        let (dw, _) = soliton_param_gradients(&p, grid).unwrap();
        // x_j and x_{n-j} are mirror images for j >= 1
        for j in 1..grid.n / 2 {
            let a = dw[j] * soliton_field(&p, grid.x(j)).conj();
            let b = dw[grid.n - j] * soliton_field(&p, grid.x(grid.n - j)).conj();
            // the amplitude part ∂ωΦ·Φ is even
            assert!((a.re - b.re).abs() < 1e-8 * (1.0 + a.re.abs()));
        }
    }
}
