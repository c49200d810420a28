use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum GgdError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed netpbm data: {0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] ggd_core::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Invalid(String),
}

impl GgdError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        GgdError::Io {
            path: path.into(),
            source,
        }
    }

    /// Bad input from the caller (as opposed to a failure while running).
    pub fn is_validation(&self) -> bool {
        use ggd_core::Error as E;
        match self {
            GgdError::Invalid(_) | GgdError::Format(_) => true,
            GgdError::Core(e) => matches!(
                e,
                E::InvalidParameter { .. }
                    | E::InvalidImage(_)
                    | E::DimensionMismatch { .. }
                    | E::ZeroReference
                    | E::CalibrationFailed { .. }
            ),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, GgdError>;
