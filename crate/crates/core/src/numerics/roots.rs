//! Bracketing and Brent's method for scalar roots.

use crate::error::{Error, Result};

/// Scan `[a, b]` with `cells` uniform cells and return every cell whose
/// endpoint values have opposite signs (or hit zero exactly).
pub fn bracket_scan<F>(f: F, a: f64, b: f64, cells: usize) -> Result<Vec<(f64, f64)>>
where
    F: Fn(f64) -> Result<f64>,
{
    let h = (b - a) / cells as f64;
    let mut brackets = Vec::new();
    let mut x0 = a;
    let mut f0 = f(x0)?;
    for i in 1..=cells {
        let x1 = if i == cells { b } else { a + h * i as f64 };
        let f1 = f(x1)?;
        if f1 == 0.0 || (i == 1 && f0 == 0.0) || f0 * f1 < 0.0 {
            brackets.push((x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    Ok(brackets)
}

/// Brent's method on a sign-changing bracket. Stops when the bracket is
/// narrower than `xtol` or `|f| <= ftol`.
pub fn brent<F>(f: F, a: f64, b: f64, xtol: f64, ftol: f64, max_iter: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::RootFinding(format!(
            "no sign change on [{a}, {b}]: f = ({fa}, {fb})"
        )));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb.abs() <= ftol {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::RootFinding(format!(
        "Brent did not converge in {max_iter} iterations"
    )))
}
