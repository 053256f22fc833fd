//! Stability criterion for single solitary waves and the hypotheses of the
//! two-soliton result.
//!
//! `F(z; σ) = (σ−1)² A(z)² − B(z)²` with
//! `A = ∫₀^∞ (cosh y − z)^{−1/σ} dy` and
//! `B = ∫₀^∞ (cosh y − z)^{−1/σ−1} (z cosh y − 1) dy`.
//! Its root `z₀(σ)` in (−1, 1) delimits the window `c < 2z₀√ω`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{brent, bracket_scan, integrate_breaks, QuadOptions};
use crate::soliton::{conserved_of_soliton, kinetic_norm_sq, soliton_moments, SolitonParams};

const F_OPTS: QuadOptions = QuadOptions {
    abs_tol: 1e-13,
    rel_tol: 1e-12,
    max_intervals: 4000,
};

fn truncation(sigma: f64) -> f64 {
    sigma * 60.0f64.max(-(1e-16f64).ln()) * (1.0 + 1.0 / sigma)
}

/// Breakpoints on `[0, y_max]` graded from the width `√(1−z)` of the peak
/// at `y = 0` when `z → 1`.
fn breaks(z: f64, y_max: f64) -> Vec<f64> {
    let w = (1.0 - z).sqrt().min(1.0);
    let mut pts = vec![0.0];
    let mut y = w;
    while y < y_max {
        pts.push(y);
        y *= 4.0;
    }
    pts.push(y_max);
    pts
}

/// The two improper integrals `(A, B)`.
pub fn f_integrals(z: f64, sigma: f64) -> Result<(f64, f64)> {
    if !(z.abs() < 1.0) {
        return Err(Error::Domain(format!("|z| = {} must be < 1", z.abs())));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::SigmaRange(sigma));
    }
    let p = 1.0 / sigma;
    let y_max = truncation(sigma);
    let pts = breaks(z, y_max);
    // cosh y − z evaluated without cancellation near y = 0
    let base = |y: f64| {
        let s = (0.5 * y).sinh();
        (1.0 - z) + 2.0 * s * s
    };
    let a = integrate_breaks(|y| base(y).powf(-p), &pts, F_OPTS)?.value;
    // z cosh y − 1 = z (cosh y − z) − (1 − z²) keeps both pieces positive
    let c = integrate_breaks(|y| base(y).powf(-p - 1.0), &pts, F_OPTS)?.value;
    let b = z * a - (1.0 - z * z) * c;
    // (cosh y − z)^{−1/σ} ≈ 2^{1/σ} e^{−y/σ} beyond y_max
    let tail = sigma * 2f64.powf(p) * (-y_max / sigma).exp();
    Ok((a + tail, b + z * tail))
}

/// `F(z; σ)`.
pub fn f_of(z: f64, sigma: f64) -> Result<f64> {
    let (a, b) = f_integrals(z, sigma)?;
    let s1 = sigma - 1.0;
    Ok(s1 * s1 * a * a - b * b)
}

/// Root of `F(·; σ)` in (−1, 1), `None` when no sign change is found.
pub fn z0_of(sigma: f64) -> Result<Option<f64>> {
    if !(sigma > 1.0 && sigma < 2.0) {
        return Err(Error::SigmaRange(sigma));
    }
    let f = |z: f64| f_of(z, sigma);
    let lo = -1.0 + 1e-6;
    let hi = 1.0 - 1e-6;
    let brackets = bracket_scan(f, lo, hi, 200)?;
    match brackets.len() {
        0 => Ok(None),
        1 => {
            let (a, b) = brackets[0];
            Ok(Some(brent(f, a, b, 1e-14, 1e-10, 200)?))
        }
        _ => Err(Error::AmbiguousRoot { brackets }),
    }
}

/// Matrix `[[∂ωM, ∂cM], [∂ωP, ∂cP]]` of `d″(ω, c)` with its determinant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hessian {
    pub matrix: [[f64; 2]; 2],
    pub det: f64,
}

/// Central differences of the closed-form `(M, P)`.
pub fn hessian_d(p: &SolitonParams) -> Result<Hessian> {
    let mut h = 1e-5 * p.omega.abs().max(p.c.abs()).max(1.0);
    for _ in 0..=3 {
        if let Ok(m) = hessian_with_step(p, h) {
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            return Ok(Hessian { matrix: m, det });
        }
        h *= 0.1;
    }
    Err(Error::StepShrink(3))
}

fn hessian_with_step(p: &SolitonParams, h: f64) -> Result<[[f64; 2]; 2]> {
    let wp = conserved_of_soliton(&p.with(p.omega + h, p.c)?)?;
    let wm = conserved_of_soliton(&p.with(p.omega - h, p.c)?)?;
    let cp = conserved_of_soliton(&p.with(p.omega, p.c + h)?)?;
    let cm = conserved_of_soliton(&p.with(p.omega, p.c - h)?)?;
    let d = 2.0 * h;
    Ok([
        [(wp.mass - wm.mass) / d, (cp.mass - cm.mass) / d],
        [(wp.momentum - wm.momentum) / d, (cp.momentum - cm.momentum) / d],
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Stable,
    Unstable,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub sigma: f64,
    pub omega: f64,
    pub c: f64,
    pub z0: Option<f64>,
    pub det_dpp: f64,
    pub classification: Classification,
    #[serde(rename = "appendixA")]
    pub appendix_a: f64,
    pub hessian: [[f64; 2]; 2],
}

/// Classify `Q_{ω,c}` against the window `c < 2z₀√ω`.
pub fn classify(p: &SolitonParams) -> Result<StabilityReport> {
    p.require_criterion_range()?;
    let z0 = z0_of(p.sigma)?.ok_or(Error::NoRoot(p.sigma))?;
    classify_with_root(p, z0)
}

/// As [`classify`] with a precomputed `z₀(σ)`.
pub fn classify_with_root(p: &SolitonParams, z0: f64) -> Result<StabilityReport> {
    let hess = hessian_d(p)?;
    let sw = p.omega.sqrt();
    let edge = 2.0 * z0 * sw;
    let classification = if (p.c - edge).abs() <= 1e-8 * sw {
        Classification::Degenerate
    } else if p.c > edge {
        Classification::Unstable
    } else if hess.det < 0.0 {
        Classification::Stable
    } else {
        // inside the window yet d″ fails the sign test
        Classification::Degenerate
    };
    Ok(StabilityReport {
        sigma: p.sigma,
        omega: p.omega,
        c: p.c,
        z0: Some(z0),
        det_dpp: hess.det,
        classification,
        appendix_a: appendix_positivity(p)?,
        hessian: hess.matrix,
    })
}

/// `2M(Q)‖∂xQ‖² − 4P(Q)²`, checked against its lower bound `∫Φ² ∫(∂xΦ)²`.
pub fn appendix_positivity(p: &SolitonParams) -> Result<f64> {
    let m = soliton_moments(p)?;
    let c = crate::soliton::Conserved::from_moments(p, &m);
    let value = 2.0 * c.mass * kinetic_norm_sq(p, &m) - 4.0 * c.momentum * c.momentum;
    let bound = m.i2 * m.dkin;
    if value < bound - 1e-9 * bound.max(1.0) || bound <= 0.0 {
        return Err(Error::Invariant(format!(
            "2M|Q_x|^2 - 4P^2 = {value} below the bound {bound}"
        )));
    }
    Ok(value)
}

/// Hypotheses of the two-soliton stability result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    /// Both waves stable and `z₀(σ) > 0`.
    pub a: bool,
    /// `Δω/Δc > 0`.
    pub b: bool,
    /// `c₁ < Δω/Δc` and `4Δω/Δc < c₂`.
    pub c: bool,
    pub z0: Option<f64>,
    pub ratio: f64,
}

impl Feasibility {
    pub fn all(&self) -> bool {
        self.a && self.b && self.c
    }

    /// Name of the first failing hypothesis.
    pub fn failure(&self) -> Option<String> {
        if !self.a {
            Some(format!(
                "(a) both waves stable with z0 > 0 (z0 = {:?})",
                self.z0
            ))
        } else if !self.b {
            Some(format!("(b) dw/dc > 0 (dw/dc = {})", self.ratio))
        } else if !self.c {
            Some(format!(
                "(c) c1 < dw/dc and 4 dw/dc < c2 (dw/dc = {})",
                self.ratio
            ))
        } else {
            None
        }
    }
}

pub fn theorem_feasibility(p1: &SolitonParams, p2: &SolitonParams) -> Result<Feasibility> {
    if p1.sigma != p2.sigma {
        return Err(Error::Domain(format!(
            "sigma differs between waves: {} vs {}",
            p1.sigma, p2.sigma
        )));
    }
    let dc = p2.c - p1.c;
    if dc == 0.0 {
        return Err(Error::DegeneratePair(p1.c));
    }
    let ratio = (p2.omega - p1.omega) / dc;
    let b = ratio > 0.0;
    let c = p1.c < ratio && 4.0 * ratio < p2.c;
    let (a, z0) = match p1.require_criterion_range().and_then(|_| z0_of(p1.sigma)) {
        Ok(Some(z0)) => {
            let r1 = classify_with_root(p1, z0)?;
            let r2 = classify_with_root(p2, z0)?;
            let stable = r1.classification == Classification::Stable
                && r2.classification == Classification::Stable;
            (stable && z0 > 0.0 && z0 < 1.0, Some(z0))
        }
        Ok(None) | Err(Error::SigmaRange(_)) => (false, None),
        Err(e) => return Err(e),
    };
    Ok(Feasibility { a, b, c, z0, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_is_minus_one_at_sigma_one() {
        for i in -9..=9 {
            let z = 0.1 * i as f64;
            assert!((f_of(z, 1.0).unwrap() + 1.0).abs() < 1e-8, "z = {z}");
        }
    }

    #[test]
    fn f_rejects_outside_interval() {
        assert!(matches!(f_of(1.0, 1.5), Err(Error::Domain(_))));
        assert!(matches!(f_of(-1.2, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn integrals_match_reference() {
        // mpmath quad of the two integrals at z = 0, σ = 1.5
        let (a, b) = f_integrals(0.0, 1.5).unwrap();
        assert!((a - 2.103_273_157_988_181_4).abs() < 1e-11 * a);
        assert!((b + 1.120_251_300_333_280_2).abs() < 1e-11 * b.abs());
    }

    #[test]
    fn root_at_sigma_1_2() {
        let z0 = z0_of(1.2).unwrap().unwrap();
        assert!((z0 - 0.718_148_207_267_322_9).abs() < 1e-9);
    }

    #[test]
    fn root_sign_near_ends() {
        assert!(z0_of(1.1).unwrap().unwrap() > 0.0);
        assert!(z0_of(1.9).unwrap().unwrap() < 0.0);
        assert!(z0_of(1.0).is_err());
    }

    #[test]
    fn hessian_symmetric() {
        let p = SolitonParams::new(1.3, 1.5, 0.4).unwrap();
        let h = hessian_d(&p).unwrap();
        assert!((h.matrix[0][1] - h.matrix[1][0]).abs() < 1e-5);
    }

    #[test]
    fn sample_classifications() {
        let p = SolitonParams::new(1.2, 1.0, -1.0).unwrap();
        assert_eq!(classify(&p).unwrap().classification, Classification::Stable);
        let p = SolitonParams::new(1.5, 1.0, 1.99).unwrap();
        assert_eq!(classify(&p).unwrap().classification, Classification::Unstable);
        let z0 = z0_of(1.5).unwrap().unwrap();
        let p = SolitonParams::new(1.5, 1.0, 2.0 * z0).unwrap();
        assert_eq!(
            classify(&p).unwrap().classification,
            Classification::Degenerate
        );
    }

    #[test]
    fn appendix_value_sigma_one() {
        let p = SolitonParams::new(1.0, 1.0, 0.0).unwrap();
        let v = appendix_positivity(&p).unwrap();
        let pi = std::f64::consts::PI;
        assert!((v - (4.0 * pi * pi - 16.0)).abs() < 1e-9);
    }

    #[test]
    fn feasibility_examples() {
        let p1 = SolitonParams::new(1.2, 4.0, -1.0).unwrap();
        let p2 = SolitonParams::new(1.2, 4.4, 1.0).unwrap();
        let f = theorem_feasibility(&p1, &p2).unwrap();
        assert!(f.a && f.b && f.c);
        assert!((f.ratio - 0.2).abs() < 1e-12);
        let q2 = SolitonParams::new(1.2, 4.0, 1.0).unwrap();
        assert!(!theorem_feasibility(&p1, &q2).unwrap().b);
        assert!(matches!(
            theorem_feasibility(&p1, &p1),
            Err(Error::DegeneratePair(_))
        ));
    }
}
