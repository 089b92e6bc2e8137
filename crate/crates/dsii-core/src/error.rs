use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse grouping used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad or inconsistent input.
    Validation,
    /// A computation violated one of its numerical invariants.
    Numerical,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("neither wavenumber constraint holds: {0}")]
    ConstraintViolation(String),

    #[error("no saddle: alpha*omega = {alpha_omega} must be below beta = {beta}")]
    NoSaddle { alpha_omega: f64, beta: f64 },

    #[error("spatial mean vanishes, phase undefined")]
    ZeroMean,

    #[error("eigenvalue branch undefined: {0}")]
    BranchUndefined(String),

    #[error("degenerate denominator at t = {t}: min/max = {ratio:e}")]
    DegenerateDenominator { t: f64, ratio: f64 },

    #[error("quadrature not converged: relative change {change:e} exceeds {tol:e}")]
    QuadratureNotConverged { change: f64, tol: f64 },

    #[error("singular denominator ({0})")]
    SingularDenominator(&'static str),

    #[error("blow-up at t = {t}: norm ratio {ratio:e}")]
    BlowUp { t: f64, ratio: f64 },

    #[error("nonlinear contamination: log-fit residual {residual:e}")]
    NonlinearContamination { residual: f64 },

    #[error("singular homological system at k={k:?}, l={l:?}: cond {cond:e}, null-space dim {null_dim}")]
    SingularSystem {
        k: (i32, i32),
        l: (i32, i32),
        cond: f64,
        null_dim: usize,
    },

    #[error("no solved normal-form entry for k={k:?}, l={l:?}")]
    MissingEntry { k: (i32, i32), l: (i32, i32) },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidInput(_)
            | Error::ConstraintViolation(_)
            | Error::NoSaddle { .. }
            | Error::ZeroMean
            | Error::BranchUndefined(_)
            | Error::MissingEntry { .. } => ErrorClass::Validation,
            _ => ErrorClass::Numerical,
        }
    }
}
