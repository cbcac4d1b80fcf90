use thiserror::Error;

use crate::selection::SelectionTrajectory;
use crate::sharing::SharingTrajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("strategy space has {profiles} profiles, above the enumeration cap of {cap}")]
    EnumerationCap { profiles: u128, cap: u64 },

    #[error("explicit adjacency matrices need {profiles} vertices, above the matrix cap of {cap}")]
    MatrixCap { profiles: u128, cap: u64 },

    #[error("integer overflow computing {0}")]
    Overflow(&'static str),

    #[error("profiles differ in more than one player's strategy")]
    NotUnilateral,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("no usable channel: every gain is zero")]
    NoUsableChannel,

    #[error("selection dynamics did not converge within {max_steps} steps")]
    SelectionNotConverged {
        max_steps: usize,
        trajectory: Box<SelectionTrajectory>,
    },

    #[error("sharing dynamics did not converge within {max_sweeps} sweeps")]
    SharingNotConverged {
        max_sweeps: usize,
        trajectory: Box<SharingTrajectory>,
    },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short name used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "invalid_params",
            Error::EnumerationCap { .. } => "enumeration_cap",
            Error::MatrixCap { .. } => "matrix_cap",
            Error::Overflow(_) => "overflow",
            Error::NotUnilateral => "not_unilateral",
            Error::Dimension(_) => "dimension",
            Error::NoUsableChannel => "no_usable_channel",
            Error::SelectionNotConverged { .. } => "selection_not_converged",
            Error::SharingNotConverged { .. } => "sharing_not_converged",
            Error::Invariant(_) => "invariant",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
