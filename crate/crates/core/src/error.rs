use thiserror::Error;

/// Errors raised by the allocation, simulation and harness layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("invalid distance {0} m: must be strictly positive")]
    InvalidDistance(f64),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid multipliers: {0}")]
    InvalidMultipliers(String),
    #[error("learner {0} is infeasible: no time left after model exchange at the minimum batch")]
    InfeasibleLearner(usize),
    #[error("infeasible problem: {0}")]
    InfeasibleProblem(String),
    #[error("degenerate multiplier: lambda_{0} is zero")]
    DegenerateMultiplier(usize),
    #[error("no KKT certificate: stationarity residual {residual:.3e} exceeds {tolerance:.1e}")]
    NoCertificate { residual: f64, tolerance: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("enumeration guard: {0}")]
    EnumerationGuard(String),
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True for errors that mean the instance itself admits no allocation.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleLearner(_) | Error::InfeasibleProblem(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
