use thiserror::Error;

/// Errors raised by the numerical operators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("n must be even ≥ 8 (got {0})")]
    InvalidPointCount(usize),
    #[error("half-width L must be positive and finite (got {0})")]
    InvalidHalfWidth(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("expected {expected} samples, got {got}")]
    SampleCount { expected: usize, got: usize },
    #[error("non-finite sample in {0}")]
    NonFinite(&'static str),
    #[error("axis must be 1, 2 or 3 (got {0})")]
    InvalidAxis(usize),
    #[error("derivative order {0} unsupported (max 2)")]
    InvalidOrder(usize),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("kernel under-resolved: width {width} below grid spacing {spacing}")]
    UnderResolved { width: f64, spacing: f64 },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("forcing is not sampled at t = {0}")]
    ForcingOutOfRange(f64),
    #[error("times must be strictly increasing and ≥ 0")]
    InvalidTimes,
    #[error("initial velocity is not solenoidal (relative divergence {0:.3e})")]
    NotSolenoidal(f64),
    #[error("degenerate normalization: {0}")]
    Degenerate(&'static str),
    #[error("regression needs at least {needed} usable samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
