//! The second variation of `S = E + ωM + cP` at `Q_{ω,c}`,
//!
//! ```text
//! S″h = −h_xx + ωh + ic h_x − i|Q|^{2σ} h_x − iσ|Q|^{2σ−2} Q_x (Q̄h + Q h̄),
//! ```
//!
//! which is only ℝ-linear. Fields are represented as real vectors
//! `(Re h, Im h)` of length `2N`; the pairing `⟨f, g⟩ = Re∫f ḡ` becomes the
//! Euclidean product scaled by `dx`, so the dense matrix has the same
//! spectrum as the operator.

use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::criterion::hessian_d;
use crate::error::{Error, Result};
use crate::grid::{Grid, Spectral};
use crate::soliton::{
    check_resolution, sample_soliton, sample_soliton_derivative, soliton_param_gradients,
    SolitonParams,
};

/// Matrix-free `S″(Q)`.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    pub params: SolitonParams,
    sp: Spectral,
    q: Vec<Complex64>,
    qx: Vec<Complex64>,
    rho_s: Vec<f64>,
    // σ|Q|^{2σ−2} Q_x
    coupling: Vec<Complex64>,
}

impl LinearizedOperator {
    /// Operator at the soliton centered at 0 with zero phase.
    pub fn new(p: &SolitonParams, grid: Grid) -> Result<Self> {
        check_resolution(p, grid)?;
        let q = sample_soliton(p, grid, 0.0, 0.0);
        let edge = q[0].norm().max(q[grid.n - 1].norm());
        if edge > 1e-10 {
            return Err(Error::Resolution(format!(
                "boundary amplitude {edge:.3e} exceeds 1e-10"
            )));
        }
        let qx = sample_soliton_derivative(p, grid, 0.0, 0.0);
        Ok(Self::from_parts(p, grid, q, qx))
    }

    /// Operator around an arbitrary sampled field (`Q ≡ 0` gives `T`).
    pub fn from_field(p: &SolitonParams, grid: Grid, q: Vec<Complex64>) -> Self {
        let qx = Spectral::new(grid).derivative(&q);
        Self::from_parts(p, grid, q, qx)
    }

    fn from_parts(p: &SolitonParams, grid: Grid, q: Vec<Complex64>, qx: Vec<Complex64>) -> Self {
        let s = p.sigma;
        let rho_s = q.iter().map(|z| z.norm_sqr().powf(s)).collect();
        let coupling = q
            .iter()
            .zip(&qx)
            .map(|(z, zx)| {
                let rho = z.norm_sqr();
                if rho > 0.0 {
                    s * rho.powf(s - 1.0) * zx
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        Self {
            params: *p,
            sp: Spectral::new(grid),
            q,
            qx,
            rho_s,
            coupling,
        }
    }

    pub fn grid(&self) -> Grid {
        self.sp.grid
    }

    pub fn spectral(&self) -> &Spectral {
        &self.sp
    }

    pub fn q(&self) -> &[Complex64] {
        &self.q
    }

    pub fn qx(&self) -> &[Complex64] {
        &self.qx
    }

    pub fn apply(&self, h: &[Complex64]) -> Vec<Complex64> {
        let i = Complex64::i();
        let hx = self.sp.derivative(h);
        let hxx = self.sp.second_derivative(h);
        let (w, c) = (self.params.omega, self.params.c);
        (0..h.len())
            .map(|j| {
                let mix = self.q[j].conj() * h[j] + self.q[j] * h[j].conj();
                -hxx[j] + w * h[j] + i * c * hx[j]
                    - i * self.rho_s[j] * hx[j]
                    - i * self.coupling[j] * mix
            })
            .collect()
    }

    /// `⟨S″h, h⟩`.
    pub fn form(&self, h: &[Complex64]) -> f64 {
        self.sp.inner(&self.apply(h), h)
    }
}

fn to_real(h: &[Complex64]) -> Vec<f64> {
    h.iter().map(|z| z.re).chain(h.iter().map(|z| z.im)).collect()
}

fn from_real(v: &[f64]) -> Vec<Complex64> {
    let n = v.len() / 2;
    (0..n).map(|j| Complex64::new(v[j], v[n + j])).collect()
}

/// Dense real symmetric form of [`LinearizedOperator`].
#[derive(Debug, Clone)]
pub struct QuadraticFormOperator {
    pub matrix: Mat<f64>,
    /// `blockdiag(I − D², I − D²)`, the H¹ Gram matrix up to the factor `dx`.
    pub gram_h1: Mat<f64>,
    pub params: SolitonParams,
    pub grid: Grid,
    /// `‖M − Mᵀ‖_F / ‖M‖_F` of the raw discretization before symmetrizing.
    pub asymmetry: f64,
    op: LinearizedOperator,
}

/// Dense assembly from the matrix-free operator applied to unit vectors.
pub fn assemble(p: &SolitonParams, grid: Grid) -> Result<QuadraticFormOperator> {
    Ok(assemble_operator(LinearizedOperator::new(p, grid)?))
}

pub fn assemble_operator(op: LinearizedOperator) -> QuadraticFormOperator {
    let grid = op.grid();
    let n = grid.n;
    let mut raw = Mat::<f64>::zeros(2 * n, 2 * n);
    let mut e = vec![Complex64::new(0.0, 0.0); n];
    for col in 0..2 * n {
        let j = col % n;
        e[j] = if col < n {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 1.0)
        };
        let out = op.apply(&e);
        for (r, z) in out.iter().enumerate() {
            raw[(r, col)] = z.re;
            raw[(n + r, col)] = z.im;
        }
        e[j] = Complex64::new(0.0, 0.0);
    }
    let mut skew = 0.0;
    let mut total = 0.0;
    let mut matrix = Mat::<f64>::zeros(2 * n, 2 * n);
    for c in 0..2 * n {
        for r in 0..2 * n {
            let a = raw[(r, c)];
            let b = raw[(c, r)];
            skew += (a - b) * (a - b);
            total += a * a;
            matrix[(r, c)] = 0.5 * (a + b);
        }
    }
    let g = circulant(&op.sp, |k| 1.0 + k * k);
    let mut gram_h1 = Mat::<f64>::zeros(2 * n, 2 * n);
    for c in 0..n {
        for r in 0..n {
            gram_h1[(r, c)] = g[(r, c)];
            gram_h1[(n + r, n + c)] = g[(r, c)];
        }
    }
    QuadraticFormOperator {
        matrix,
        gram_h1,
        params: op.params,
        grid,
        asymmetry: (skew / total.max(f64::MIN_POSITIVE)).sqrt(),
        op,
    }
}

/// Real circulant matrix with Fourier symbol `f(k)`; `k` is the effective
/// first-derivative wavenumber (zero on the Nyquist bin).
fn circulant<F: Fn(f64) -> f64>(sp: &Spectral, f: F) -> Mat<f64> {
    let n = sp.n();
    let sym: Vec<f64> = (0..n).map(|j| f(sp.derivative_symbol(j).im)).collect();
    let mut first = vec![Complex64::new(0.0, 0.0); n];
    first[0] = Complex64::new(1.0, 0.0);
    sp.forward(&mut first);
    for (z, s) in first.iter_mut().zip(&sym) {
        *z *= s;
    }
    sp.inverse(&mut first);
    Mat::from_fn(n, n, |r, c| first[(r + n - c) % n].re)
}

impl QuadraticFormOperator {
    pub fn operator(&self) -> &LinearizedOperator {
        &self.op
    }

    /// `matrix · v` on a complex field.
    pub fn apply(&self, h: &[Complex64]) -> Vec<Complex64> {
        let v = to_real(h);
        let m = self.matrix.nrows();
        let out: Vec<f64> = (0..m)
            .map(|r| (0..m).map(|c| self.matrix[(r, c)] * v[c]).sum())
            .collect();
        from_real(&out)
    }

    pub fn form(&self, h: &[Complex64], g: &[Complex64]) -> f64 {
        self.op.sp.inner(&self.apply(h), g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// The `k` lowest eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub n_neg: usize,
    pub n_zero: usize,
    pub tau: f64,
    pub norm: f64,
    /// Largest principal angle between the two eigenvectors closest to zero
    /// and `span{iQ, ∂xQ}`.
    pub kernel_angle: f64,
    /// `ω − c²/4`.
    pub ess_bound: f64,
    /// Fraction of eigenvalues above the kernel that exceed `0.95 (ω − c²/4)`.
    pub ess_fraction: f64,
}

/// Full symmetric eigensolve; counts use `τ = 1e−6 ‖A‖`.
pub fn spectrum(a: &QuadraticFormOperator, k: usize) -> Result<SpectrumReport> {
    let evd = a
        .matrix
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let m = s.nrows();
    let vals: Vec<f64> = (0..m).map(|i| s[i]).collect();
    let norm = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tau = 1e-6 * norm;
    let n_neg = vals.iter().filter(|&&v| v < -tau).count();
    let n_zero = vals.iter().filter(|&&v| v.abs() <= tau).count();

    let mut by_abs: Vec<usize> = (0..m).collect();
    by_abs.sort_by(|&i, &j| vals[i].abs().total_cmp(&vals[j].abs()));
    let u = evd.U();
    let kernel: Vec<Vec<f64>> = by_abs[..2]
        .iter()
        .map(|&i| (0..m).map(|r| u[(r, i)]).collect())
        .collect();
    let i = Complex64::i();
    let iq: Vec<Complex64> = a.op.q.iter().map(|z| i * z).collect();
    let basis = orthonormalize(vec![to_real(&iq), to_real(&a.op.qx)]);
    let kernel_angle = principal_angle(&kernel, &basis);

    let p = &a.params;
    let ess_bound = p.omega - 0.25 * p.c * p.c;
    let top = by_abs[..2].iter().copied().max().unwrap_or(0);
    let above = &vals[top + 1..];
    let ess_fraction = if above.is_empty() {
        1.0
    } else {
        above.iter().filter(|&&v| v >= 0.95 * ess_bound).count() as f64 / above.len() as f64
    };
    Ok(SpectrumReport {
        eigenvalues: vals.iter().take(k).copied().collect(),
        n_neg,
        n_zero,
        tau,
        norm,
        kernel_angle,
        ess_bound,
        ess_fraction,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram–Schmidt, applied twice.
fn orthonormalize(mut vs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    for _ in 0..2 {
        for j in 0..vs.len() {
            for i in 0..j {
                let (head, tail) = vs.split_at_mut(j);
                let d = dot(&head[i], &tail[0]);
                for (x, y) in tail[0].iter_mut().zip(&head[i]) {
                    *x -= d * y;
                }
            }
            let nrm = dot(&vs[j], &vs[j]).sqrt();
            for x in vs[j].iter_mut() {
                *x /= nrm;
            }
        }
    }
    vs
}

/// Largest principal angle between two orthonormal 2-frames.
fn principal_angle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let m = [
        [dot(&a[0], &b[0]), dot(&a[0], &b[1])],
        [dot(&a[1], &b[0]), dot(&a[1], &b[1])],
    ];
    // singular values of m from the eigenvalues of mᵀm
    let p = m[0][0] * m[0][0] + m[1][0] * m[1][0];
    let r = m[0][1] * m[0][1] + m[1][1] * m[1][1];
    let q = m[0][0] * m[0][1] + m[1][0] * m[1][1];
    let mean = 0.5 * (p + r);
    let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
    let smin = (mean - rad).max(0.0).sqrt().min(1.0);
    smin.acos()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    /// `‖S″(iQ)‖ / ‖Q‖`
    pub phase: f64,
    /// `‖S″(∂xQ)‖ / ‖Q‖`
    pub translation: f64,
    /// `‖S″∂ωQ + Q‖ / ‖Q‖`
    pub omega: f64,
    /// `‖S″∂cQ + i∂xQ‖ / ‖Q‖`
    pub speed: f64,
    /// `⟨S″∂ωQ, ∂ωQ⟩`
    pub omega_form: f64,
    /// `−∂ωM(Q)` from the closed-form Hessian
    pub minus_dm_domega: f64,
}

/// Kernel and parameter-derivative identities of `S″(Q)`.
pub fn kernel_and_hessian_identities(op: &LinearizedOperator) -> Result<IdentityResiduals> {
    let p = op.params;
    let grid = op.grid();
    let sp = &op.sp;
    let i = Complex64::i();
    let qn = sp.l2_norm(&op.q);
    let rel = |v: Vec<Complex64>| sp.l2_norm(&v) / qn;
    let iq: Vec<Complex64> = op.q.iter().map(|z| i * z).collect();
    let phase = rel(op.apply(&iq));
    let translation = rel(op.apply(&op.qx));
    let (dw, dc) = soliton_param_gradients(&p, grid)?;
    let aw = op.apply(&dw);
    let omega = rel(aw.iter().zip(&op.q).map(|(a, q)| a + q).collect());
    let ac = op.apply(&dc);
    let speed = rel(ac.iter().zip(&op.qx).map(|(a, qx)| a + i * qx).collect());
    let omega_form = sp.inner(&aw, &dw);
    let minus_dm_domega = -hessian_d(&p)?.matrix[0][0];
    Ok(IdentityResiduals {
        phase,
        translation,
        omega,
        speed,
        omega_form,
        minus_dm_domega,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    /// Minimum of `⟨S″ε, ε⟩ / ‖ε‖²_{H¹}` over `ε ⊥ {Q, ∂xQ, iQ, i∂xQ}`.
    pub margin: f64,
    /// The same minimum without constraints.
    pub unconstrained: f64,
}

/// Projected generalized eigensolve in the H¹ metric. The Gram matrix is
/// circulant, so `G^{−1/2}` is applied exactly through its symbol.
pub fn constrained_coercivity(a: &QuadraticFormOperator) -> Result<CoercivityReport> {
    let n = a.grid.n;
    let sp = &a.op.sp;
    let g = circulant(sp, |k| (1.0 + k * k).powf(-0.5));
    let m = &a.matrix;
    let block = |r0: usize, c0: usize| Mat::from_fn(n, n, |r, c| m[(r0 + r, c0 + c)]);
    let mut b = Mat::<f64>::zeros(2 * n, 2 * n);
    for (r0, c0) in [(0, 0), (0, n), (n, 0), (n, n)] {
        let blk = &(&g * &block(r0, c0)) * &g;
        for c in 0..n {
            for r in 0..n {
                b[(r0 + r, c0 + c)] = blk[(r, c)];
            }
        }
    }
    // symmetrize away rounding from the products
    for c in 0..2 * n {
        for r in 0..c {
            let v = 0.5 * (b[(r, c)] + b[(c, r)]);
            b[(r, c)] = v;
            b[(c, r)] = v;
        }
    }
    let unconstrained = min_eigenvalue(&b)?;

    let i = Complex64::i();
    let q = &a.op.q;
    let qx = &a.op.qx;
    let dirs: Vec<Vec<Complex64>> = vec![
        q.clone(),
        qx.clone(),
        q.iter().map(|z| i * z).collect(),
        qx.iter().map(|z| i * z).collect(),
    ];
    // ⟨ε, C⟩_{L²} = 0 with ε = G^{−1/2}w becomes w ⊥ G^{−1/2}C
    let smooth = |h: &[Complex64]| {
        let v = to_real(h);
        let mut out = vec![0.0; 2 * n];
        for r in 0..n {
            let mut re = 0.0;
            let mut im = 0.0;
            for c in 0..n {
                re += g[(r, c)] * v[c];
                im += g[(r, c)] * v[n + c];
            }
            out[r] = re;
            out[n + r] = im;
        }
        out
    };
    let u = orthonormalize(dirs.iter().map(|d| smooth(d)).collect());
    let k = u.len();
    let bu: Vec<Vec<f64>> = u
        .iter()
        .map(|col| {
            (0..2 * n)
                .map(|r| (0..2 * n).map(|c| b[(r, c)] * col[c]).sum())
                .collect()
        })
        .collect();
    let mut ubu = vec![vec![0.0; k]; k];
    for s in 0..k {
        for t in 0..k {
            ubu[s][t] = dot(&u[s], &bu[t]);
        }
    }
    let gersh = (0..2 * n)
        .map(|r| (0..2 * n).map(|c| b[(r, c)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let shift = 10.0 * gersh.max(1.0);
    let mut pb = b.clone();
    for c in 0..2 * n {
        for r in 0..2 * n {
            let mut v = 0.0;
            for s in 0..k {
                v -= u[s][r] * bu[s][c] + bu[s][r] * u[s][c];
                v += shift * u[s][r] * u[s][c];
                for t in 0..k {
                    v += u[s][r] * ubu[s][t] * u[t][c];
                }
            }
            pb[(r, c)] += v;
        }
    }
    Ok(CoercivityReport {
        margin: min_eigenvalue(&pb)?,
        unconstrained,
    })
}

fn min_eigenvalue(m: &Mat<f64>) -> Result<f64> {
    let vals = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    vals.first()
        .copied()
        .ok_or_else(|| Error::Eigen("empty matrix".into()))
}
