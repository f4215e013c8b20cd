use thiserror::Error;

use crate::interferometer::SaturationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input failed a contract check (bad field value, wrong length, unknown key).
    #[error("validation error: {0}")]
    Validation(String),

    /// A source sits on a collector, or a whole amplitude column vanishes.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("matrix is not unitary: ||R^H R - I||_F = {residual:.3e}")]
    NotUnitary { residual: f64 },

    /// An operation's stated precondition does not hold for this input.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The detection probabilities do not depend on the parameter.
    #[error("parameter is not identifiable: {0}")]
    NonIdentifiable(String),

    #[error("saturation check failed: {}", .0.failures.join("; "))]
    Saturation(Box<SaturationReport>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::Saturation(_) => 3,
            _ => 2,
        }
    }
}
