use thiserror::Error;

use crate::forms::TransformReport;
use crate::model::OutputKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mass matrix singular")]
    MassSingular,

    #[error("wrong output kind: expected {expected}, found {found}")]
    WrongOutputKind {
        expected: &'static str,
        found: OutputKind,
    },

    #[error("non-diagonalizable state matrix: {0}")]
    NonDiagonalizable(String),

    #[error("singular resolvent (iωI - A) at {freq_hz} Hz")]
    SingularResolvent { freq_hz: f64 },

    #[error("singular matrix at {freq_hz} Hz: {what}")]
    SingularAtFrequency { freq_hz: f64, what: String },

    #[error("unknown DOF label {0}")]
    UnknownLabel(String),

    #[error("duplicate pairing of DOF {0}")]
    DuplicatePairing(String),

    #[error("duplicate DOF label {0}")]
    DuplicateLabel(String),

    #[error("Boolean matrix has a zero column at index {0}")]
    ZeroColumn(usize),

    #[error("interface feed-through singular (condition number {condition:.3e})")]
    InterfaceFeedthroughSingular { condition: f64 },

    #[error("{what} singular (condition number {condition:.3e})")]
    SingularOperator { what: String, condition: f64 },

    #[error("interface output matrix rank deficient (rank {rank} < {expected})")]
    InterfaceOutputRankDeficient { rank: usize, expected: usize },

    #[error("interface input matrix rank deficient (rank {rank} < {expected})")]
    InterfaceInputRankDeficient { rank: usize, expected: usize },

    #[error("coupling-form transformation matrix is rank deficient: {0:?}")]
    TransformSingular(Box<TransformReport>),

    #[error("model is not in the expected structure: {0}")]
    Structure(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("frequency grids differ")]
    GridMismatch,

    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
