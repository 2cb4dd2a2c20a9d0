use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error at {path}: {message}")]
    Validation { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid synthesis request: {0}")]
    Spec(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("insufficient horizon: {available} future steps available, {required} required")]
    InsufficientHorizon { available: usize, required: usize },

    #[error("unknown vehicle `{vehicle_id}` at timestep {timestep}")]
    UnknownVehicle { vehicle_id: String, timestep: i64 },

    #[error("invalid render config: {0}")]
    Config(String),

    #[error("no feasible question: {0}")]
    NoFeasibleQuestion(String),

    #[error("missing predictions for {} item(s): {}", .0.len(), .0.join(", "))]
    MissingPrediction(Vec<String>),

    #[error("prediction references unknown qa_id `{0}`")]
    UnknownId(String),

    #[error("duplicate prediction for qa_id `{0}`")]
    DuplicatePrediction(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),
}

impl Error {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { path: path.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by the environment rather than the input data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
