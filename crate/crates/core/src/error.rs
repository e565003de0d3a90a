use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("grid index {index:?} lies outside V_{radius}")]
    IndexOutOfGrid { index: Vec<i64>, radius: u32 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid potential parameters: {0}")]
    InvalidPotential(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("series did not converge: tail bound {tail:e} exceeds tolerance {tolerance:e} at n_max = {n_max}")]
    SeriesDivergence { tail: f64, tolerance: f64, n_max: usize },
    #[error("rejection sampler degenerate: estimated acceptance {acceptance:e}; shrink the region or the activity")]
    DegenerateAcceptance { acceptance: f64 },
    #[error("local stability violated: influence {influence} below -L = {bound}")]
    LocalStabilityViolated { influence: f64, bound: f64 },
    #[error("time {t} outside trajectory range [0, {end}]")]
    TimeOutOfRange { t: f64, end: f64 },
    #[error("state space too large: {size} states exceeds cap {cap}")]
    StateSpaceTooLarge { size: usize, cap: usize },
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("time window empty for n = {n}: need {lower} <= t < {upper}{}", minimal_hint(*.minimal_n))]
    EmptyTimeWindow { n: u32, lower: f64, upper: f64, minimal_n: Option<u32> },
}

fn minimal_hint(n: Option<u32>) -> String {
    match n {
        Some(n) => alloc::format!("; smallest feasible n is {n}"),
        None => String::from("; no n admits a window at this activity"),
    }
}

pub type Result<T> = core::result::Result<T, Error>;
