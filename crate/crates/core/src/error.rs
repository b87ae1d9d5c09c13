use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unphysical qubit state (x={x}, y={y}, z={z})")]
    UnphysicalState { x: f64, y: f64, z: f64 },

    #[error("trajectory is irreversible: dephasing rate {dephase_extra} > 0")]
    Irreversible { dephase_extra: f64 },

    #[error("operation requires a nonempty ensemble")]
    EmptyEnsemble,

    #[error("no histogram bin pair has both counts >= {min_count}")]
    NoQualifyingBins { min_count: u64 },

    #[error("histogram edges are not symmetric about zero")]
    AsymmetricHistogram,

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::UnphysicalState { .. }
                | Error::Irreversible { .. }
                | Error::Config { .. }
                | Error::MissingFile(_)
                | Error::Format(_)
                | Error::AsymmetricHistogram
                | Error::EmptyEnsemble
        )
    }
}
