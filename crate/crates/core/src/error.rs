use std::io;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("{what} exceeds the supported bound ({got} > {max})")]
    SizeExceeded {
        what: &'static str,
        got: usize,
        max: usize,
    },

    #[error("no unique-solution instance with n={n}, m={m} after {attempts} attempts")]
    GenerationExhausted { n: usize, m: usize, attempts: usize },

    #[error("DIMACS line {line}: {msg}")]
    Dimacs { line: usize, msg: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("coefficient {value} is not on the grid (l={bound}, delta={step})")]
    OffGrid { value: f64, bound: f64, step: f64 },

    #[error("grid index {index} out of range [0, {max}]")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("time {t} outside [0, {total}]")]
    TimeOutOfRange { t: f64, total: f64 },

    #[error("invalid anneal configuration: {0}")]
    InvalidAnneal(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite loss {loss} (value term {value_term}, policy term {policy_term})")]
    NonFiniteLoss {
        loss: f64,
        value_term: f64,
        policy_term: f64,
    },

    #[error("evaluation #{query} failed: {source}")]
    Evaluation {
        query: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
