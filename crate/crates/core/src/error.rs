use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// The variants are grouped so that front ends can map them onto a small
/// set of exit codes: parse failures, numerical failures, violated
/// preconditions and non-convergence.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not Hermitian (residual {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is singular")]
    Singular,

    #[error("eigenvalue modulus {modulus} collides with radius {radius}")]
    BoundaryCollision { modulus: f64, radius: f64 },

    #[error("eigenvalue {eigenvalue} lies within {distance:e} of the contour")]
    ContourCollision { eigenvalue: String, distance: f64 },

    #[error("sample point {0} is too close to a pole")]
    NearPole(String),

    #[error("projection is not invariant (residual {residual:e})")]
    NotInvariant { residual: f64 },

    #[error("eigenvalue clusters too close to separate ({gap:e})")]
    DefectiveClustering { gap: f64 },

    #[error("malformed block unitary: {0}")]
    Malformed(String),

    #[error("did not converge: {0}")]
    NoConvergence(String),

    #[error("step size underflow at t = {t}: {reason}")]
    StepUnderflow { t: f64, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Exit-code class: 2 parse, 3 numerics, 4 precondition, 5 nonconvergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::NonFinite | Error::NotSquare { .. } => 2,
            Error::Singular
            | Error::Numerical(_)
            | Error::NotHermitian { .. }
            | Error::DefectiveClustering { .. } => 3,
            Error::Dimension(_)
            | Error::InvalidParameter(_)
            | Error::BoundaryCollision { .. }
            | Error::ContourCollision { .. }
            | Error::NearPole(_)
            | Error::NotInvariant { .. }
            | Error::Malformed(_) => 4,
            Error::NoConvergence(_) | Error::StepUnderflow { .. } => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
