use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The speed signal left the admissible band (constant sign, bounded magnitude and slope).
    #[error("speed profile violates its declared bounds: {0}")]
    SpeedBounds(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("flux and torque estimates are undefined while the inverse-flux estimate is zero")]
    UndefinedFlux,

    #[error("numerical divergence at t = {t:.6e} s: {detail}")]
    Divergence { t: f64, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {detail}")]
    Plot { path: PathBuf, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
