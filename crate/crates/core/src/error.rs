use std::path::PathBuf;

use crate::game::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid game specification:\n{0}")]
    Validation(ValidationReport),

    #[error("unknown state {0}")]
    UnknownState(String),

    #[error("unknown action {action} for {player} in state {state}")]
    UnknownAction {
        state: String,
        player: String,
        action: usize,
    },

    #[error("unknown attacker type {0}")]
    UnknownType(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("game too large for this solver: {0}")]
    SizeLimit(String),

    #[error("simplex exceeded {0} pivots")]
    IterationLimit(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("structural mismatch: {0}")]
    Structure(String),

    #[error("environment handle does not expose the backing game")]
    Exposure,

    #[error("act called on terminal state {0}")]
    TerminalState(String),
}
