use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid clock: {0}")]
    InvalidClock(String),
    #[error("invalid initial state: {0}")]
    InvalidInitialState(String),
    #[error("non-finite value {value} in stock `{stock}` at t = {time}")]
    NonFinite { time: f64, stock: String, value: f64 },
    #[error("derivative vector has {got} entries, state has {expected}")]
    DerivativeLength { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("missing parameter `{0}`")]
    Missing(String),
    #[error("unknown parameter `{0}`")]
    Unknown(String),
    #[error("parameter `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("parameter file: {0}")]
    Parse(String),
}

/// Crate-level error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("scenario `{scenario}`: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown series `{0}`")]
    UnknownSeries(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Calibration(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn in_scenario(self, scenario: &str) -> Self {
        Error::Scenario {
            scenario: scenario.to_string(),
            source: Box::new(self),
        }
    }
}
