use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("{family} exponent evaluated on its branch cut at s = {arg}")]
    BranchCut { family: &'static str, arg: Complex64 },

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("non-finite cumulant c{order} = {value}")]
    NonFiniteCumulant { order: u8, value: f64 },

    #[error("degenerate truncation interval [{a}, {b}]")]
    DegenerateInterval { a: f64, b: f64 },

    #[error("COS sum produced a negative price {raw:e}; widen the interval or raise n_terms")]
    NegativePrice { raw: f64 },

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(&'static str),

    #[error("regime {0} never occurs in the labels")]
    RegimeAbsent(u8),

    #[error("{method} did not converge after {iterations} iterations (best residual {residual:e})")]
    NonConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("all simulated densities underflowed; data lies outside the simulated support")]
    LikelihoodUnderflow,

    #[error("pricing failed on quote row {row}: {source}")]
    QuoteRow {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            constraint: "must be finite and > 0",
        })
    }
}

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            constraint: "must be finite",
        })
    }
}
