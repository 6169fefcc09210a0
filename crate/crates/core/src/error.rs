use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("gamma is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("singular normal matrix")]
    SingularNormalMatrix,

    #[error("insufficient history: need {needed} samples, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("scenario error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("scenario failed validation: {0}")]
    Validation(String),

    #[error("unknown agent {0}")]
    UnknownAgent(usize),

    #[error("non-finite value at step {step}: {what}")]
    NonFinite { step: usize, what: String },

    #[error("step {step}, uav {agent}: {source}")]
    AtStep {
        step: usize,
        agent: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("velocity bound exceeded at step {step} by uav {agent}: |u| = {speed} > {bound}")]
    VelocityBound {
        step: usize,
        agent: usize,
        speed: f64,
        bound: f64,
    },

    #[error("log format: {0}")]
    LogFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at(self, step: usize, agent: usize) -> Error {
        Error::AtStep {
            step,
            agent,
            source: Box::new(self),
        }
    }

    /// Failure category used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Topology(_) | Error::Schema { .. } | Error::Validation(_) | Error::InvalidArgument(_) => {
                ErrorKind::Validation
            }
            Error::Io(_) | Error::Csv(_) | Error::LogFormat(_) => ErrorKind::Io,
            Error::AtStep { source, .. } => source.kind(),
            _ => ErrorKind::Runtime,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Runtime,
    Io,
}
