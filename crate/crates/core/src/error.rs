use thiserror::Error;

/// Errors produced by the numerical operations in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// `|λ|^(-1/2) <= min(b1 - b0, 1)` does not hold.
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    /// Some partial derivative of ρ falls below the gradient floor.
    #[error("gradient floor violated: min |∂_{axis} ρ| = {value:e} at {point:?}")]
    GradientFloor { axis: usize, value: f64, point: Vec<f64> },

    #[error("no root of ρ along axis {axis} for slice point {slice:?}")]
    NoRoot { axis: usize, slice: Vec<f64> },

    #[error("numerical non-convergence: {0}")]
    NonConvergence(String),

    #[error("signal is not band-limited below {xi_max}: relative out-of-band energy {energy:e}")]
    BandLimit { xi_max: f64, energy: f64 },

    #[error("frequency {xi} lies beyond the tiling cap {xi_max}")]
    OutOfCap { xi: f64, xi_max: f64 },

    #[error("frequency {0} is a cell boundary")]
    BoundaryFrequency(f64),

    #[error("coefficients reference cells absent from the tiling")]
    CellMismatch,

    #[error("point {0:?} lies outside the box")]
    OutOfBox(Vec<f64>),

    #[error("|∇ρ| below floor at {0:?}")]
    DegenerateGradient(Vec<f64>),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
