use thiserror::Error;

/// Errors produced anywhere in the QAOA/TSP pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid tour: {0}")]
    InvalidTour(String),

    #[error("brute-force oracle limited to n <= {limit} cities, got {n}")]
    OracleLimitExceeded { n: usize, limit: usize },

    #[error("bitstring length {got} does not match layout of {expected} qubits")]
    LayoutMismatch { expected: usize, got: usize },

    #[error("layout error: city {city}, time {time} out of range for n = {n}")]
    Layout { city: usize, time: usize, n: usize },

    #[error("penalty weight must be positive, got {0}")]
    InvalidPenalty(f64),

    #[error("cost table limited to {limit} qubits, got {qubits}")]
    TableLimitExceeded { qubits: usize, limit: usize },

    #[error("basis index {index} out of range for {qubits} qubits")]
    Index { index: usize, qubits: usize },

    #[error("invalid gate: {0}")]
    Gate(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid noise specification: {0}")]
    Noise(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("optimizer failure: {0}")]
    Optimizer(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
