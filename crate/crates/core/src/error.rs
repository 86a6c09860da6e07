use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {requested} outside supported range 1..={max}")]
    Capacity { requested: usize, max: usize },

    #[error("qubit index {index} out of range for {num_qubits}-qubit state")]
    QubitIndex { index: usize, num_qubits: usize },

    #[error("gate targets must be distinct, got control={control} target={target}")]
    DuplicateTarget { control: usize, target: usize },

    #[error("expected {expected} parameters, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("label {label} out of range for {num_classes} classes")]
    Label { label: usize, num_classes: usize },

    #[error("invalid state vector: {0}")]
    InvalidState(String),

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("partition error: {0}")]
    Partition(String),

    #[error("stratification error: class {label} has {count} sample(s), need at least 2")]
    Stratification { label: usize, count: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("metrics schema error in {path}: missing column `{column}`")]
    Schema { path: PathBuf, column: String },

    #[error("no metrics found: {0}")]
    NoMetrics(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("writing {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn output(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Output {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 data, 4 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Parse { .. }
            | Error::Format { .. }
            | Error::Schema { .. }
            | Error::NoMetrics(_)
            | Error::DegenerateInput(_)
            | Error::Stratification { .. }
            | Error::Partition(_)
            | Error::Label { .. }
            | Error::Io { .. }
            | Error::Csv(_) => 3,
            Error::Output { .. }
            | Error::Capacity { .. }
            | Error::QubitIndex { .. }
            | Error::DuplicateTarget { .. }
            | Error::Arity { .. }
            | Error::Shape { .. }
            | Error::InvalidState(_) => 4,
        }
    }
}
