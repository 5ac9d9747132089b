use thiserror::Error;

use crate::geom::GridPos;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("position ({}, {}) is outside the {h}x{w} grid", pos.row, pos.col)]
    OffGrid { pos: GridPos, h: usize, w: usize },

    #[error("no other agents")]
    NoOtherAgents,

    #[error("at least two agents are required, got {0}")]
    NotEnoughAgents(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("episode generation failed: {0}")]
    Generation(String),

    #[error("episode is already finished")]
    EpisodeDone,

    #[error("expected {expected} actions, got {got}")]
    BadActions { expected: usize, got: usize },

    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("unknown token `{0}`")]
    UnknownToken(String),

    #[error("temperature must be positive, got {0}")]
    InvalidTemperature(f64),

    #[error("probability {0} is outside (0, 1)")]
    ProbabilityOutOfRange(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("corpus error at line {line}: {msg}")]
    Corpus { line: usize, msg: String },

    #[error("out-of-vocabulary word `{0}`")]
    OutOfVocabulary(String),

    #[error("transcript parse error: {0}")]
    Transcript(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
