use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate geometry: bird at the base of tower `{tower}`")]
    DegenerateGeometry { tower: String },

    #[error("display value {z} is at or above the saturation level {z_max}")]
    Saturated { z: f64, z_max: f64 },

    #[error("display value {z} is below the floor {z_min}")]
    BelowFloor { z: f64, z_min: f64 },

    #[error("adaptive quadrature did not converge on entry ({row}, {col})")]
    Quadrature { row: usize, col: usize },

    #[error("numerical degeneracy: {0}")]
    Numerical(String),

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that come from the numerics rather than from the
    /// caller's inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_) | Error::Quadrature { .. } | Error::Initialization(_)
        )
    }
}
