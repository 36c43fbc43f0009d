use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("observation has zero likelihood under the current belief and control")]
    ImpossibleObservation,

    #[error("infeasible control: {0}")]
    InfeasibleControl(String),

    #[error("{what} needs {size} entries which exceeds the cap of {cap}")]
    CapExceeded { what: &'static str, size: u128, cap: u128 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("classifier error: {0}")]
    Classifier(String),

    #[error("memory buffer is empty")]
    EmptyBuffer,

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
