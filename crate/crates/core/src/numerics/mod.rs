//! Scalar numerical building blocks.

pub mod quadrature;
pub mod roots;

pub use quadrature::{integrate, integrate_breaks, QuadOptions, QuadResult};
pub use roots::{bracket_scan, brent};
