use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),

    #[error("sequence of {len} tokens exceeds context length {max}")]
    ContextOverflow { len: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid budget: {0}")]
    InvalidBudget(String),

    #[error("invalid group: {0}")]
    InvalidGroup(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),

    #[error("incompatible models: {0}")]
    IncompatibleModels(String),

    #[error("budget violation: {0}")]
    BudgetViolation(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("threshold not reached: {0}")]
    NotConverged(String),

    #[error("malformed record: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidSpec(_)
            | Error::InvalidArgument(_)
            | Error::InvalidBudget(_)
            | Error::InvalidGroup(_)
            | Error::InvalidConfig(_)
            | Error::ContextOverflow { .. }
            | Error::IncompatibleModels(_) => 2,
            Error::MissingData(_) | Error::InvalidCheckpoint(_) | Error::Format(_) => 3,
            Error::Divergence(_) => 4,
            Error::Io(_) => 5,
            Error::NotConverged(_) => 6,
            Error::BudgetViolation(_) => 1,
        }
    }
}
