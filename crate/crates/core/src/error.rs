use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical accuracy error: {0}")]
    NumericalAccuracy(String),

    #[error("infeasible heralding event: {0}")]
    InfeasibleEvent(String),

    #[error("insufficient Monte-Carlo statistics: kept {kept} of {trials} trials (acceptance rate {rate:e})")]
    InsufficientStatistics { kept: u64, trials: u64, rate: f64 },

    #[error("Mandel Q is undefined for a field with zero mean photon number")]
    UndefinedQ,

    #[error("not found: {0}")]
    NotFound(String),

    #[error("unknown figure id `{0}`")]
    UnknownFigure(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
