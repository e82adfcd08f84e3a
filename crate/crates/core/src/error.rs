use thiserror::Error;

/// Errors raised by the numerical experiments and their front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The frequency grid is too coarse for the requested (x, t) range.
    #[error("under-resolved quadrature: grid spacing {spacing:.6e} exceeds the allowed {allowed:.6e}")]
    Resolution { spacing: f64, allowed: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("unsupported dimension {0} (only 1 and 3 are implemented)")]
    UnsupportedDimension(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
