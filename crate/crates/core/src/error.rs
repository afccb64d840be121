use thiserror::Error;

use crate::admissibility::{AdmissibilityReport, ConstructiveFailure};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on inputs was violated.
    #[error("invalid input: {0}")]
    Validation(String),

    /// The periodic Poisson problem has no solution for a field with nonzero mean.
    #[error("field has nonzero mean {mean:e} (rms {rms:e}); periodic Poisson problem is unsolvable")]
    NonZeroMean { mean: f64, rms: f64 },

    /// A denominator (density, heat capacity) became nonpositive at a grid point.
    #[error("degenerate state: {field} = {value:e} at grid point {index}")]
    Degenerate { field: String, index: usize, value: f64 },

    #[error("certificate construction failed: {0}")]
    Construction(ConstructiveFailure),

    #[error("certificate search exhausted its budget; best min normalized margin {:e}", .0.min_normalized_margin())]
    SearchExhausted(Box<AdmissibilityReport>),

    #[error("inadmissible certificate: {}", .0.summary())]
    Inadmissible(Box<AdmissibilityReport>),

    #[error("equilibrium sampling failed: {0}")]
    Sampling(String),

    #[error("eigenvalue computation failed at |xi|^2 = {xi_sq:e}")]
    Eigen { xi_sq: f64 },

    #[error("linear solve is singular at mode {mode}")]
    SingularSolve { mode: usize },

    /// The energy left the small-data regime during a run.
    #[error("instability: energy {energy:e} exceeded {factor}x initial energy at t = {t}")]
    Instability { t: f64, energy: f64, factor: f64 },

    #[error("precondition refused: {0}")]
    Refused(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
