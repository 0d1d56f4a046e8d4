use thiserror::Error;

/// Errors raised by the toolkit's operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probabilities sum to {sum}, expected 1 within 1e-12")]
    SumNotOne { sum: f64 },
    #[error("top atom probs[{d}] is zero; trim trailing zeros so d is the support maximum")]
    TopAtomZero { d: usize },
    #[error("mean {mean} is not supercritical (must exceed 1)")]
    Subcritical { mean: f64 },
    #[error("invalid probability vector: {0}")]
    InvalidProbs(String),
    #[error("argument out of range: {0}")]
    Range(String),
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("population overflow: generation size exceeded 2^62")]
    Overflow,
    #[error("tilt degenerate: tilted law puts mass {mass_on_top} on the top atom")]
    DegenerateTilt { mass_on_top: f64 },
    #[error("iteration overflow: log value {value} exceeds 1e6")]
    IterationOverflow { value: f64 },
    #[error("no interior minimum: {0}")]
    NoInteriorMinimum(String),
    #[error("offspring law has no mass on the top atom")]
    EtaZero,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
