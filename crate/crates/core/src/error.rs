use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameters outside the soliton cone: 4*omega - c^2 = {disc} (omega = {omega}, c = {c})")]
    ParameterDomain { omega: f64, c: f64, disc: f64 },

    #[error("sigma = {0} is outside the admissible range")]
    SigmaRange(f64),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("F(z; sigma) has several sign changes in (-1, 1): {brackets:?}")]
    AmbiguousRoot { brackets: Vec<(f64, f64)> },

    #[error("no root of F(z; sigma) found for sigma = {0}")]
    NoRoot(f64),

    #[error("degenerate soliton pair: c1 = c2 = {0}")]
    DegeneratePair(f64),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("grid does not resolve the soliton: {0}")]
    Resolution(String),

    #[error("finite-difference step left the parameter domain after {0} shrinks")]
    StepShrink(usize),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("blow-up at t = {t}: max |u_x| = {max_gradient:.3e}")]
    BlowUp { t: f64, max_gradient: f64 },

    #[error("decomposition failed after {iterations} Newton iterations, max residual {max_residual:.3e}")]
    Decomposition { iterations: usize, max_residual: f64 },

    #[error("modulation Jacobian nearly singular (condition number {0:.3e})")]
    NearDegenerate(f64),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
