use thiserror::Error;

/// Errors raised by the model, simulation and pricing layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("exponential moment unbounded: {0}")]
    ExponentialMomentUnbounded(String),
    #[error("time grid is empty")]
    EmptyGrid,
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("reversed interval: t = {t} exceeds maturity {maturity}")]
    ReversedInterval { t: f64, maturity: f64 },
    #[error("grid exhausted: no pillar at or beyond {0}")]
    GridExhausted(f64),
    #[error("missing path state: {0}")]
    MissingState(String),
    #[error("total importance weight is zero")]
    ZeroTotalWeight,
    #[error("time {t} lies before the period start {start}")]
    BeforePeriodStart { t: f64, start: f64 },
    #[error("date {0} is not on the simulation grid")]
    ScheduleOffGrid(f64),
    #[error("only fully collateralized claims are supported by the simulation pricer")]
    UncollateralizedUnsupported,
    #[error("fair spread sensitivity is zero")]
    DegenerateSensitivity,
    #[error("admissibility violation: {0}")]
    AdmissibilityViolation(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
