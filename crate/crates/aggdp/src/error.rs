use thiserror::Error;

/// Errors shared across the toolkit.
///
/// [`Error::is_numerical`] splits the variants into the two classes the CLI
/// reports via its exit code: bad inputs (exit 2) versus numerical failures
/// encountered while solving (exit 3).
#[derive(Debug, Error)]
pub enum Error {
    /// Model construction or validation failed.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Aggregation scheme construction or validation failed.
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),

    /// A caller-supplied argument was out of range or inconsistent.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An input file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// An iterative solver hit its iteration cap before meeting its tolerance.
    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: u64, residual: f64 },

    /// A linear system had no usable pivot at the configured threshold.
    #[error("singular linear system: {0}")]
    Singular(String),

    /// Incremental training diverged.
    #[error("training diverged: {0}")]
    Diverged(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::Singular(_) | Error::Diverged(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
