use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the relation being evaluated.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    /// A scenario file failed validation. `key` is the dotted key path.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("stream is not time-ordered at record {index}")]
    Unordered { index: usize },

    #[error("histogram binning mismatch: {0}")]
    BinningMismatch(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("event file parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Returns an error if `times` is not non-decreasing.
pub(crate) fn check_ordered<T: PartialOrd>(times: impl IntoIterator<Item = T>) -> Result<()> {
    let mut prev: Option<T> = None;
    for (index, t) in times.into_iter().enumerate() {
        if let Some(p) = &prev {
            if t < *p {
                return Err(Error::Unordered { index });
            }
        }
        prev = Some(t);
    }
    Ok(())
}
