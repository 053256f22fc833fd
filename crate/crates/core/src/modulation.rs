//! Modulation of a field near a sum of `K` solitary waves,
//! `u = Σ_k Q_{ω_k,c_k}(x − x_k) e^{iγ_k} + ε`, with `ε` orthogonal (real
//! pairing) to `R_k`, `i∂xR_k`, `iR_k` and `∂xR_k` for every `k`.
//!
//! Parameters are packed as `q = (ω_1..ω_K, c_1..c_K, x_1..x_K, γ_1..γ_K)`,
//! which for `K = 2` is `(ω₁, ω₂, c₁, c₂, x₁, x₂, γ₁, γ₂)`. Residuals are
//! ordered wave by wave, four per wave.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField, Spectral};
use crate::soliton::{sample_soliton, sample_soliton_derivative, SolitonParams};

pub const MAX_NEWTON: usize = 50;
pub const MAX_HALVINGS: usize = 8;
pub const MAX_CONDITION: f64 = 1e10;

/// Result of a successful decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationState {
    pub k: usize,
    pub sigma: f64,
    pub q: Vec<f64>,
    pub epsilon: GridField,
    pub orth_residuals: Vec<f64>,
    pub h1_eps: f64,
    pub iterations: usize,
}

impl ModulationState {
    pub fn omega(&self, j: usize) -> f64 {
        self.q[j]
    }
    pub fn c(&self, j: usize) -> f64 {
        self.q[self.k + j]
    }
    pub fn x(&self, j: usize) -> f64 {
        self.q[2 * self.k + j]
    }
    /// Unwrapped phase.
    pub fn gamma(&self, j: usize) -> f64 {
        self.q[3 * self.k + j]
    }
    /// Phase reduced to `[0, 2π)`.
    pub fn gamma_mod(&self, j: usize) -> f64 {
        self.gamma(j).rem_euclid(2.0 * PI)
    }
    pub fn params(&self, j: usize) -> Result<SolitonParams> {
        SolitonParams::new(self.sigma, self.omega(j), self.c(j))
    }
    pub fn max_residual(&self) -> f64 {
        self.orth_residuals.iter().fold(0.0, |a, r| a.max(r.abs()))
    }
}

/// Decomposition problem for a fixed field.
pub struct Modulator<'a> {
    u: &'a GridField,
    grid: Grid,
    sigma: f64,
    k: usize,
}

/// `Σ_k R_k` for a packed parameter vector.
pub fn soliton_sum(grid: Grid, sigma: f64, q: &[f64]) -> Result<Vec<Complex64>> {
    let k = check_len(q)?;
    let mut out = vec![Complex64::new(0.0, 0.0); grid.n];
    for j in 0..k {
        let p = SolitonParams::new(sigma, q[j], q[k + j])?;
        for (o, r) in out.iter_mut().zip(sample_soliton(&p, grid, q[2 * k + j], q[3 * k + j])) {
            *o += r;
        }
    }
    Ok(out)
}

fn check_len(q: &[f64]) -> Result<usize> {
    if q.is_empty() || q.len() % 4 != 0 {
        return Err(Error::Domain(format!(
            "parameter vector of length {} is not 4K",
            q.len()
        )));
    }
    Ok(q.len() / 4)
}

impl<'a> Modulator<'a> {
    pub fn new(u: &'a GridField, sigma: f64, k: usize) -> Self {
        Self {
            u,
            grid: u.grid(),
            sigma,
            k,
        }
    }

    /// `ε(q)` and the `4K` functionals `⟨ε, R⟩, ⟨ε, i∂xR⟩, ⟨ε, iR⟩, ⟨ε, ∂xR⟩`.
    pub fn residuals(&self, q: &[f64]) -> Result<(Vec<Complex64>, Vec<f64>)> {
        let k = self.k;
        let mut waves = Vec::with_capacity(k);
        let mut eps = self.u.samples.clone();
        for j in 0..k {
            let p = SolitonParams::new(self.sigma, q[j], q[k + j])?;
            let (x0, g0) = (q[2 * k + j], q[3 * k + j]);
            let r = sample_soliton(&p, self.grid, x0, g0);
            let rx = sample_soliton_derivative(&p, self.grid, x0, g0);
            for (e, v) in eps.iter_mut().zip(&r) {
                *e -= v;
            }
            waves.push((r, rx));
        }
        let dx = self.grid.dx();
        let mut res = Vec::with_capacity(4 * k);
        for (r, rx) in &waves {
            // ⟨ε, iφ⟩ = Re Σ ε conj(iφ) = Im Σ ε conj(φ)
            let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
            for j in 0..eps.len() {
                let e = eps[j];
                let pr = e * r[j].conj();
                let px = e * rx[j].conj();
                a += pr.re;
                b += px.im;
                c += pr.im;
                d += px.re;
            }
            res.extend([a * dx, b * dx, c * dx, d * dx]);
        }
        Ok((eps, res))
    }

    fn steps(q: &[f64]) -> Vec<f64> {
        q.iter().map(|v| 1e-6 * v.abs().max(1.0)).collect()
    }

    /// `∂ϱ/∂q` by central differences of the residual map.
    pub fn jacobian(&self, q: &[f64]) -> Result<Mat<f64>> {
        let m = q.len();
        let h = Self::steps(q);
        let mut jac = Mat::<f64>::zeros(m, m);
        let mut qp = q.to_vec();
        for col in 0..m {
            qp[col] = q[col] + h[col];
            let up = self.residuals(&qp)?.1;
            qp[col] = q[col] - h[col];
            let dn = self.residuals(&qp)?.1;
            qp[col] = q[col];
            for row in 0..m {
                jac[(row, col)] = (up[row] - dn[row]) / (2.0 * h[col]);
            }
        }
        Ok(jac)
    }

    /// Damped Newton from `guess`.
    pub fn solve(&self, guess: &[f64]) -> Result<ModulationState> {
        let k = check_len(guess)?;
        if k != self.k {
            return Err(Error::Domain(format!("expected {} waves, got {k}", self.k)));
        }
        check_guess(guess, self.sigma)?;
        let unorm = self.u.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx();
        let tol = 1e-10 * unorm.sqrt();
        let mut q = guess.to_vec();
        let (mut eps, mut res) = self.residuals(&q)?;
        let mut rnorm = max_abs(&res);
        let mut iterations = 0;
        let mut polish = 0;
        while iterations < MAX_NEWTON {
            if rnorm <= tol {
                // a few extra steps drive the residual to rounding level
                if polish >= 3 || rnorm == 0.0 {
                    break;
                }
                polish += 1;
            }
            iterations += 1;
            let jac = self.jacobian(&q)?;
            let sv = jac
                .singular_values()
                .map_err(|e| Error::Eigen(format!("{e:?}")))?;
            let cond = sv[0] / sv[sv.len() - 1];
            if !(cond <= MAX_CONDITION) {
                return Err(Error::NearDegenerate(cond));
            }
            let rhs = Mat::from_fn(q.len(), 1, |r, _| -res[r]);
            let delta = jac.partial_piv_lu().solve(&rhs);
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let trial: Vec<f64> = (0..q.len()).map(|i| q[i] + lambda * delta[(i, 0)]).collect();
                if let Ok((e, r)) = self.residuals(&trial) {
                    let n = max_abs(&r);
                    if n < rnorm {
                        accepted = Some((trial, e, r, n));
                        break;
                    }
                }
                lambda *= 0.5;
            }
            match accepted {
                Some((t, e, r, n)) => {
                    q = t;
                    eps = e;
                    res = r;
                    rnorm = n;
                }
                None if rnorm <= tol => break,
                None => {
                    return Err(Error::Decomposition {
                        iterations,
                        max_residual: rnorm,
                    })
                }
            }
        }
        if rnorm > tol {
            return Err(Error::Decomposition {
                iterations,
                max_residual: rnorm,
            });
        }
        let sp = Spectral::new(self.grid);
        let h1_eps = sp.h1_norm(&eps);
        Ok(ModulationState {
            k,
            sigma: self.sigma,
            q,
            epsilon: GridField::new(self.grid, self.u.t, eps)?,
            orth_residuals: res,
            h1_eps,
            iterations,
        })
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn check_guess(q: &[f64], sigma: f64) -> Result<()> {
    let k = q.len() / 4;
    let mut kappa_min = f64::INFINITY;
    for j in 0..k {
        let p = SolitonParams::new(sigma, q[j], q[k + j])?;
        kappa_min = kappa_min.min(p.kappa);
    }
    for j in 1..k {
        let sep = q[2 * k + j] - q[2 * k + j - 1];
        if sep < 10.0 / kappa_min {
            return Err(Error::Domain(format!(
                "guess separation {sep:.3} below 10/kappa = {:.3}",
                10.0 / kappa_min
            )));
        }
    }
    Ok(())
}

/// Decompose `u` starting from `guess` (length `4K`).
pub fn decompose(u: &GridField, sigma: f64, guess: &[f64]) -> Result<ModulationState> {
    let k = check_len(guess)?;
    Modulator::new(u, sigma, k).solve(guess)
}

/// `4K × 4K` Jacobian of the orthogonality functionals at `q`.
pub fn jacobian(u: &GridField, sigma: f64, q: &[f64]) -> Result<Mat<f64>> {
    let k = check_len(q)?;
    Modulator::new(u, sigma, k).jacobian(q)
}

/// The `4 × 4` block of residuals of wave `row` against parameters of
/// wave `col`, parameters ordered `(ω, c, x, γ)`.
pub fn jacobian_block(jac: &Mat<f64>, row: usize, col: usize) -> Mat<f64> {
    let k = jac.nrows() / 4;
    let cols = [col, k + col, 2 * k + col, 3 * k + col];
    Mat::from_fn(4, 4, |r, c| jac[(4 * row + r, cols[c])])
}

/// Predict parameters at `t + dt` from exact soliton motion.
pub fn predict(q: &[f64], dt: f64) -> Vec<f64> {
    let k = q.len() / 4;
    let mut p = q.to_vec();
    for j in 0..k {
        p[2 * k + j] += q[k + j] * dt;
        p[3 * k + j] += q[j] * dt;
    }
    p
}

/// Shift each phase of `q` by a multiple of 2π to lie nearest `reference`.
pub fn unwrap_phases(q: &mut [f64], reference: &[f64]) {
    let k = q.len() / 4;
    for j in 3 * k..4 * k {
        q[j] += 2.0 * PI * ((reference[j] - q[j]) / (2.0 * PI)).round();
    }
}

/// One row of a tracked series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub t: f64,
    pub q: Vec<f64>,
    pub h1_eps: f64,
    pub max_orth: f64,
    /// Backward-difference diagnostics, maximized over waves:
    /// `|ω̇|, |ċ|, |ẋ − c|, |γ̇ − ω|`; zero on the first row.
    pub rates: [f64; 4],
}

/// Output of [`track`]; `failure` records where the decomposition stopped.
#[derive(Debug, Clone)]
pub struct Track {
    pub records: Vec<TrackRecord>,
    pub states: Vec<ModulationState>,
    pub failure: Option<(f64, String)>,
}

/// Incremental tracker with warm starts.
#[derive(Debug, Clone)]
pub struct Tracker {
    sigma: f64,
    last: Option<(f64, Vec<f64>)>,
    pub records: Vec<TrackRecord>,
}

impl Tracker {
    pub fn new(sigma: f64, q0: Vec<f64>, t0: f64) -> Self {
        Self {
            sigma,
            last: Some((t0, q0)),
            records: Vec::new(),
        }
    }

    pub fn last_q(&self) -> Option<&[f64]> {
        self.last.as_ref().map(|(_, q)| q.as_slice())
    }

    /// Decompose the next field, warm-started from the previous state.
    pub fn push(&mut self, u: &GridField) -> Result<ModulationState> {
        let (t_prev, q_prev) = self
            .last
            .clone()
            .ok_or_else(|| Error::Domain("tracker has no state".into()))?;
        let first = self.records.is_empty();
        let guess = if first {
            q_prev.clone()
        } else {
            predict(&q_prev, u.t - t_prev)
        };
        let mut state = decompose(u, self.sigma, &guess)?;
        unwrap_phases(&mut state.q, &guess);
        let k = state.k;
        let mut rates = [0.0f64; 4];
        if !first {
            let dt = u.t - t_prev;
            if dt > 0.0 {
                for j in 0..k {
                    let d = |i: usize| (state.q[i] - q_prev[i]) / dt;
                    let wm = 0.5 * (state.q[j] + q_prev[j]);
                    let cm = 0.5 * (state.q[k + j] + q_prev[k + j]);
                    rates[0] = rates[0].max(d(j).abs());
                    rates[1] = rates[1].max(d(k + j).abs());
                    rates[2] = rates[2].max((d(2 * k + j) - cm).abs());
                    rates[3] = rates[3].max((d(3 * k + j) - wm).abs());
                }
            }
        }
        self.records.push(TrackRecord {
            t: u.t,
            q: state.q.clone(),
            h1_eps: state.h1_eps,
            max_orth: state.max_residual(),
            rates,
        });
        self.last = Some((u.t, state.q.clone()));
        Ok(state)
    }
}

/// Track a trajectory of fields from `q0`.
pub fn track<'a, I>(trajectory: I, sigma: f64, q0: &[f64]) -> Track
where
    I: IntoIterator<Item = &'a GridField>,
{
    let mut it = trajectory.into_iter().peekable();
    let t0 = it.peek().map(|f| f.t).unwrap_or(0.0);
    let mut tracker = Tracker::new(sigma, q0.to_vec(), t0);
    let mut states = Vec::new();
    let mut failure = None;
    for f in it {
        match tracker.push(f) {
            Ok(s) => states.push(s),
            Err(e) => {
                failure = Some((f.t, e.to_string()));
                break;
            }
        }
    }
    Track {
        records: tracker.records,
        states,
        failure,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> (Grid, Vec<f64>) {
        let grid = Grid::new(2048, 80.0).unwrap();
        (grid, vec![4.0, 4.4, -1.0, 1.0, -12.0, 12.0, 0.3, -1.1])
    }

    #[test]
    fn exact_sum_has_zero_residual() {
        let (grid, q) = pair();
        let u = GridField::new(grid, 0.0, soliton_sum(grid, 1.2, &q).unwrap()).unwrap();
        let (eps, res) = Modulator::new(&u, 1.2, 2).residuals(&q).unwrap();
        assert!(eps.iter().all(|z| z.norm() < 1e-15));
        assert!(res.iter().all(|r| r.abs() < 1e-14));
    }

    #[test]
    fn recovers_from_perturbed_guess() {
        let (grid, q) = pair();
        let u = GridField::new(grid, 0.0, soliton_sum(grid, 1.2, &q).unwrap()).unwrap();
        let guess: Vec<f64> = q.iter().map(|v| v + 0.01).collect();
        let s = decompose(&u, 1.2, &guess).unwrap();
        for (a, b) in s.q.iter().zip(&q) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_close_guess() {
        let (grid, mut q) = pair();
        let u = GridField::new(grid, 0.0, soliton_sum(grid, 1.2, &q).unwrap()).unwrap();
        q[4] = -0.5;
        q[5] = 0.5;
        assert!(matches!(decompose(&u, 1.2, &q), Err(Error::Domain(_))));
    }

    #[test]
    fn unwrap_picks_nearest_branch() {
        let mut q = vec![1.0, 0.0, 0.0, 0.1];
        unwrap_phases(&mut q, &[1.0, 0.0, 0.0, 6.3]);
        assert!((q[3] - (0.1 + 2.0 * PI)).abs() < 1e-15);
    }
}
