use thiserror::Error;

/// Errors raised by state construction, simulation and reconstruction.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("hidden-mode basis needs at least {required} modes, got {found}")]
    HiddenDimension { required: usize, found: usize },

    #[error("vector is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("state violates exchange symmetry (deviation {0:e})")]
    NotBosonic(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("incomplete measurement design: rank {rank}, need {required}")]
    IncompleteDesign { rank: usize, required: usize },

    #[error("no counts recorded")]
    NoCounts,

    #[error("maximum-likelihood fit did not converge after {iterations} iterations (nll {nll})")]
    NotConverged {
        iterations: usize,
        nll: f64,
        best: Box<crate::tomography::TomographyResult>,
    },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
