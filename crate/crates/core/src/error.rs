use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("reference image has zero norm")]
    ZeroReference,

    #[error(
        "relative noise {target}% is unreachable: sigma in [0, {max_sigma}] only reaches {reached:.4}%"
    )]
    CalibrationFailed {
        target: f64,
        reached: f64,
        max_sigma: f64,
    },

    #[error(
        "neighbour graph is disconnected: vertex {to} is unreachable from vertex {from}; \
         increase delta (currently {delta})"
    )]
    DisconnectedGraph { from: usize, to: usize, delta: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix is not symmetric (max |a_ij - a_ji| = {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("could not draw a basis of rank {wanted} after {attempts} attempts")]
    DegenerateBasis { wanted: usize, attempts: usize },

    #[error("numerically singular matrix in {0}")]
    SingularMatrix(&'static str),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
