use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid return distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("state {0} is outside the domain of the system")]
    StateOutOfDomain(i64),

    #[error("invalid tower schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("{operation} requires a recurrent system")]
    TransientRejected { operation: &'static str },

    #[error("insufficient halo: horizon {horizon} needs states up to {required}, system represents up to {available}")]
    InsufficientHalo {
        horizon: u64,
        required: i64,
        available: i64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
