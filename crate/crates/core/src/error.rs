use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("birth probability must lie in (0, 1], got {0}")]
    InvalidBirthProbability(f64),

    #[error("death rate must be positive and finite, got {0}")]
    InvalidDeathRate(f64),

    #[error("power-family exponents must be non-negative, got a={a}, b={b}")]
    InvalidExponent { a: f64, b: f64 },

    #[error("power-family coefficients must be positive and finite, got c={c}, d={d}")]
    InvalidCoefficient { c: f64, d: f64 },

    #[error("tabulated profiles need non-empty rate tables")]
    EmptyTable,

    #[error("unknown profile kind `{0}`")]
    UnknownProfileKind(String),

    #[error("profile kind `{kind}` expects {expected} parameters, got {got}")]
    BadParamCount {
        kind: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("birth-rate multiplier must be positive and finite, got {0}")]
    InvalidLambda(f64),

    #[error("time horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),

    #[error("right cutoff {cutoff} must exceed the initial site {start}")]
    CutoffBelowStart { cutoff: usize, start: usize },

    #[error("ratio-limit horizon must be at least {min}, got {got}")]
    HorizonTooShort { min: usize, got: usize },

    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),

    #[error("configuration is empty; the process is already extinct")]
    EmptyConfiguration,

    #[error("series test needs at least {min} terms, got {got}")]
    TooFewTerms { min: usize, got: usize },

    #[error("truncation {truncation} must exceed start + 1 with start {start}")]
    TruncationTooSmall { truncation: usize, start: usize },

    #[error("lambda grid must be positive, finite and strictly increasing")]
    InvalidGrid,

    #[error("at least one replica is required")]
    NoReplicas,

    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),

    #[error("survival results are empty; nothing to report")]
    EmptyResults,

    #[error("trace replay failed at event {index}: {reason}")]
    ReplayFailed { index: usize, reason: String },

    #[error("extinction-bound cross-check failed: the rate-ratio series did not diverge")]
    SeriesCrossCheck,

    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("trace sink failed: {0}")]
    Sink(#[from] io::Error),

    #[error("invalid config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
