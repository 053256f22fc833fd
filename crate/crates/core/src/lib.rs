//! Numerical laboratory for solitary waves of the generalized derivative
//! nonlinear Schrödinger equation
//!
//! ```text
//! i u_t + u_xx + i |u|^{2σ} u_x = 0.
//! ```
//!
//! The crate builds the exact two-parameter solitary waves, evaluates the
//! stability criterion and the spectral structure of the linearized
//! operator, evolves the equation pseudospectrally and tracks modulation
//! parameters and localized monotonicity functionals along two-soliton runs.

pub mod criterion;
pub mod error;
pub mod evolver;
pub mod functionals;
pub mod grid;
pub mod harness;
pub mod linop;
pub mod modulation;
pub mod numerics;
pub mod soliton;

pub use error::{Error, Result};
pub use grid::{Grid, GridField, Spectral};
pub use soliton::{Conserved, SolitonMoments, SolitonParams};
