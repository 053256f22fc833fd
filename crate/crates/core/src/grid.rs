//! Uniform periodic grids, sampled fields and Fourier-spectral calculus.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid descriptor: `n` points on `[-l_dom/2, l_dom/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub l_dom: f64,
}

impl Grid {
    pub fn new(n: usize, l_dom: f64) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Grid(format!("n = {n} must be a power of two")));
        }
        if !(l_dom.is_finite() && l_dom > 0.0) {
            return Err(Error::Grid(format!("domain length {l_dom} must be positive")));
        }
        Ok(Self { n, l_dom })
    }

    pub fn dx(&self) -> f64 {
        self.l_dom / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -0.5 * self.l_dom + j as f64 * self.dx()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Displacement `x - center` folded into `[-l_dom/2, l_dom/2)`.
    pub fn periodic_offset(&self, x: f64, center: f64) -> f64 {
        let l = self.l_dom;
        let d = x - center;
        d - l * ((d + 0.5 * l) / l).floor()
    }

    /// Angular wavenumber of FFT bin `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let m = if j <= self.n / 2 {
            j as f64
        } else {
            j as f64 - self.n as f64
        };
        2.0 * PI * m / self.l_dom
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.wavenumber(j)).collect()
    }
}

/// A complex field sampled on a periodic grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub n: usize,
    pub l_dom: f64,
    pub t: f64,
    pub samples: Vec<Complex64>,
}

impl GridField {
    pub fn new(grid: Grid, t: f64, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.n {
            return Err(Error::Grid(format!(
                "{} samples for a grid of {} points",
                samples.len(),
                grid.n
            )));
        }
        Ok(Self {
            n: grid.n,
            l_dom: grid.l_dom,
            t,
            samples,
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            n: grid.n,
            l_dom: grid.l_dom,
            t: 0.0,
            samples: vec![Complex64::new(0.0, 0.0); grid.n],
        }
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(grid: Grid, t: f64, f: F) -> Self {
        let samples = (0..grid.n).map(|j| f(grid.x(j))).collect();
        Self {
            n: grid.n,
            l_dom: grid.l_dom,
            t,
            samples,
        }
    }

    pub fn grid(&self) -> Grid {
        Grid {
            n: self.n,
            l_dom: self.l_dom,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest modulus in the two edge cells relative to the peak modulus.
    pub fn edge_ratio(&self) -> f64 {
        let peak = self.max_abs();
        if peak == 0.0 {
            return 0.0;
        }
        let edge = self.samples[0].norm().max(self.samples[self.n - 1].norm());
        edge / peak
    }

    /// Check the strict field invariants: `n >= 256`, power of two, finite.
    pub fn validate(&self) -> Result<()> {
        if self.n < 256 || !self.n.is_power_of_two() {
            return Err(Error::Grid(format!(
                "n = {} must be a power of two >= 256",
                self.n
            )));
        }
        if !self.is_finite() {
            return Err(Error::Grid("field has non-finite samples".into()));
        }
        Ok(())
    }

    /// Soliton-scenario boundary check (`|u|` at the edges <= 1e-10 max|u|).
    pub fn check_edges(&self, tol: f64) -> Result<()> {
        let r = self.edge_ratio();
        if r > tol {
            return Err(Error::Resolution(format!(
                "edge amplitude ratio {r:.3e} exceeds {tol:.1e}"
            )));
        }
        Ok(())
    }
}

/// FFT plans and wavenumbers for one grid.
#[derive(Clone)]
pub struct Spectral {
    pub grid: Grid,
    k: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n);
        let inv = planner.plan_fft_inverse(grid.n);
        Self {
            grid,
            k: grid.wavenumbers(),
            fwd,
            inv,
        }
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx()
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    /// In-place forward transform (unnormalized).
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
    }

    /// In-place inverse transform, normalized so `inverse(forward(u)) = u`.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
        let s = 1.0 / self.grid.n as f64;
        for z in buf.iter_mut() {
            *z *= s;
        }
    }

    /// Multiplier `i k` of the first derivative; zero on the Nyquist bin so
    /// that the discrete derivative maps real data to real data.
    pub fn derivative_symbol(&self, j: usize) -> Complex64 {
        if j == self.grid.n / 2 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, self.k[j])
        }
    }

    pub fn derivative(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut buf = u.to_vec();
        self.forward(&mut buf);
        for (j, z) in buf.iter_mut().enumerate() {
            *z *= self.derivative_symbol(j);
        }
        self.inverse(&mut buf);
        buf
    }

    /// Second derivative as the square of the first-derivative multiplier.
    pub fn second_derivative(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut buf = u.to_vec();
        self.forward(&mut buf);
        for (j, z) in buf.iter_mut().enumerate() {
            let d = self.derivative_symbol(j);
            *z *= d * d;
        }
        self.inverse(&mut buf);
        buf
    }

    /// Whether bin `j` survives the 2/3 dealiasing rule.
    pub fn keeps_mode(&self, j: usize) -> bool {
        let n = self.grid.n;
        let m = if j <= n / 2 { j } else { n - j };
        3 * m < n
    }

    /// Zero the upper third of the spectrum (in Fourier space).
    pub fn dealias(&self, hat: &mut [Complex64]) {
        for (j, z) in hat.iter_mut().enumerate() {
            if !self.keeps_mode(j) {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Real pairing `Re ∫ f conj(g) dx` by the trapezoid rule.
    pub fn inner(&self, f: &[Complex64], g: &[Complex64]) -> f64 {
        inner(f, g, self.dx())
    }

    pub fn l2_norm(&self, u: &[Complex64]) -> f64 {
        self.inner(u, u).sqrt()
    }

    /// `(∫|u|² + ∫|u_x|²)^{1/2}` with the spectral derivative.
    pub fn h1_norm(&self, u: &[Complex64]) -> f64 {
        let ux = self.derivative(u);
        (self.inner(u, u) + self.inner(&ux, &ux)).sqrt()
    }
}

/// Real pairing `Re Σ f conj(g) dx`.
pub fn inner(f: &[Complex64], g: &[Complex64], dx: f64) -> f64 {
    f.iter()
        .zip(g)
        .map(|(a, b)| a.re * b.re + a.im * b.im)
        .sum::<f64>()
        * dx
}
