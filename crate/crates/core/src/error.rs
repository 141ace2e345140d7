use thiserror::Error;

/// Errors raised by the model and optimisation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid power {value} at index {index}: powers must be finite and strictly positive")]
    InvalidPower { index: usize, value: f64 },

    #[error("the serving set must contain at least one power")]
    EmptyServingSet,

    #[error("invalid {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("rate grid must be non-decreasing (index {index})")]
    UnsortedGrid { index: usize },

    #[error(
        "degenerate powers {first} and {second}: relative gap {gap:e} is below {min_gap:e} and perturbation is disabled"
    )]
    DegeneratePowers {
        first: f64,
        second: f64,
        gap: f64,
        min_gap: f64,
    },

    #[error("closed form is ill-conditioned (cancellation ratio {ratio:e}) and the oracle fallback is disabled")]
    IllConditioned { ratio: f64 },

    #[error("invalid search bounds [{lo}, {hi}]")]
    InvalidBounds { lo: f64, hi: f64 },

    #[error("goodput objective is identically zero on [{lo}, {hi}]")]
    ZeroObjective { lo: f64, hi: f64 },

    #[error("outage target {target} is not reached below the threshold cap {cap} (outage there: {reached})")]
    NoSolution { target: f64, cap: f64, reached: f64 },

    #[error("empty sample set")]
    EmptySamples,
}

pub type Result<T> = std::result::Result<T, Error>;
