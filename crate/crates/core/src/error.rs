use alloc::string::String;

use crate::mechanism::{Phase, Role};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid match: a match needs two distinct teams, got {0:?} twice")]
    InvalidMatch(String),

    #[error("invalid proposal: {0}")]
    InvalidProposal(String),

    #[error("cannot {action} while the protocol is in phase {phase:?}")]
    OutOfOrder { action: &'static str, phase: Phase },

    #[error("only the {expected:?} captain may {action}")]
    WrongRole { action: &'static str, expected: Role },

    #[error("team {0:?} is not part of this match")]
    UnknownTeam(String),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("invalid valuation model: {0}")]
    InvalidModel(String),

    #[error("indifference solver failed: {0}")]
    SolverFailure(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("no team can be designated to decide: equal rankings on a neutral ground")]
    Undecidable,

    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("comparison invalid: {0}")]
    ComparisonInvalid(String),

    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
