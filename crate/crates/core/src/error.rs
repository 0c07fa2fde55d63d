use thiserror::Error;

use crate::model::Phase;

/// Everything that can abort a protocol step or an experiment.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("value needs {needed} bytes but words are {width} bytes wide")]
    Overflow { needed: usize, width: usize },

    #[error("word width {0} is outside the supported range 2..=32")]
    InvalidWidth(usize),

    #[error("receive time {recv} is before send time {send}")]
    ClockSkew { send: u64, recv: u64 },

    #[error("stale timestamp: sent at {send}, received at {recv}, window {delta}")]
    StaleTimestamp { send: u64, recv: u64, delta: u64 },

    #[error("identity already registered")]
    DuplicateId,

    #[error("local card check failed (wrong identity or password)")]
    AuthLocal,

    #[error("no matching user record")]
    UnknownUser,

    #[error("login authenticator mismatch")]
    MacMismatch,

    #[error("server failed mutual authentication")]
    ServerAuth,

    #[error("presented token does not match the issued token")]
    TokenMismatch,

    #[error("malformed message: {0}")]
    MalformedMessage(String),

    #[error("card belongs to a different scheme")]
    WrongScheme,

    #[error("phase {0:?} cannot be handled here")]
    UnsupportedPhase(Phase),

    #[error("budget exceeded: requested {requested}, limit {limit}")]
    BudgetExceeded { requested: u64, limit: u64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
