use thiserror::Error;

/// Errors produced by the library.
///
/// Variants are grouped by pipeline stage so callers (notably the CLI) can
/// map them onto distinct exit codes without string matching.
#[derive(Debug, Error)]
pub enum Error {
    /// File could not be read or written.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A CSV or JSON payload did not match the expected schema.
    #[error("parse error in {file}: {message}")]
    Parse { file: String, message: String },

    /// Input data violated a structural requirement (balance, sign,
    /// dimensions, incidence pattern, ...).
    #[error("invalid data: {0}")]
    Validation(String),

    /// A sector's technology could not be calibrated from the two observed
    /// states.
    #[error("calibration failed for sector {sector}: {reason}")]
    Calibration { sector: String, reason: String },

    /// The price fixed point did not meet the convergence criterion.
    #[error(
        "equilibrium iteration did not converge after {iterations} iterations \
         (last relative changes: {trace_tail:?})"
    )]
    NonConvergence {
        iterations: usize,
        trace_tail: Vec<f64>,
    },

    /// A linear system central to the computation is singular or outside the
    /// regime where the relevant Neumann series converges.
    #[error("linear algebra failure: {0}")]
    Singular(String),

    /// A limit on problem size was exceeded.
    #[error("problem too large: {0}")]
    TooLarge(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable code for each error family.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::Calibration { .. } => "calibration",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Singular(_) => "singular",
            Error::TooLarge(_) => "too_large",
        }
    }
}
