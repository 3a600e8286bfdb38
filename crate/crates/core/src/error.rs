use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is outside its documented range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Caller-supplied data violates an operation's precondition.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// A trajectory line left the difference matrix.
    #[error("trajectory ending at column {end} with velocity {velocity} leaves a matrix of {cols} columns")]
    OutOfRange {
        end: usize,
        velocity: f64,
        cols: usize,
    },

    #[error("no feasible (index, velocity) candidate around index {prev} with shift {shift}")]
    EvaluationInfeasible { prev: usize, shift: usize },

    #[error("all particle weights are zero")]
    DegeneratePopulation,

    #[error("particle weights are not normalized (sum {0})")]
    NotNormalized(f64),

    #[error("schedule infeasible: level {level} test length {test_len} is below the minimum {minimum}")]
    ScheduleInfeasible {
        level: usize,
        test_len: usize,
        minimum: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("{path}: row {row}: {message}")]
    Csv {
        path: PathBuf,
        row: usize,
        message: String,
    },
}

impl Error {
    /// Short machine-readable tag used by the CLI and the C ABI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Input(_) => "input",
            Error::Empty(_) => "empty",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::OutOfRange { .. } => "out_of_range",
            Error::EvaluationInfeasible { .. } => "evaluation_infeasible",
            Error::DegeneratePopulation => "degenerate_population",
            Error::NotNormalized(_) => "not_normalized",
            Error::ScheduleInfeasible { .. } => "schedule_infeasible",
            Error::Io { .. } => "io",
            Error::Decode { .. } => "decode",
            Error::Csv { .. } => "csv",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
