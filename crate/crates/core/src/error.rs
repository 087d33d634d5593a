use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("neuron {0} is both visible and hidden")]
    PartitionOverlap(usize),
    #[error("neuron {0} is neither visible nor hidden")]
    PartitionIncomplete(usize),
    #[error("neuron {0} lists itself as a parent")]
    SelfLoop(usize),
    #[error("duplicate edge {src} -> {dst}")]
    DuplicateEdge { src: usize, dst: usize },
    #[error("edge {src} -> {dst} refers to a source or neuron that does not exist")]
    DanglingEdge { src: usize, dst: usize },
    #[error("unknown neuron index {0}")]
    UnknownNeuron(usize),
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
    #[error("bandwidth must be positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("exhaustive enumeration over {hidden} hidden neurons x {horizon} steps exceeds the limit of {limit} binary variables")]
    EnumerationTooLarge {
        hidden: usize,
        horizon: usize,
        limit: usize,
    },
    #[error("value {0} outside [0, 1]")]
    ValueOutOfRange(f64),
    #[error("invalid encoder: {0}")]
    InvalidEncoder(String),
    #[error("error mode requires {0}")]
    ModeMismatch(&'static str),
    #[error("accumulator holds {held} examples but batch size is {batch}")]
    CountMismatch { held: usize, batch: usize },
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input rather than a failing runtime.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
