use std::path::PathBuf;

use thiserror::Error;

use crate::fixed_point::FixedPointReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("hypothesis violated: {name} ({detail})")]
    HypothesisViolation { name: &'static str, detail: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("correlation {0} is outside (-1, 1)")]
    OutOfRange(f64),

    #[error("bandwidth {bandwidth} spans {cells:.2} cells along {axis}; at least 3 are required")]
    BandwidthTooSmall {
        axis: &'static str,
        bandwidth: f64,
        cells: f64,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate quote at maturity {maturity}, strike {strike} (line {line})")]
    DuplicateQuote {
        maturity: f64,
        strike: f64,
        line: usize,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("calendar arbitrage: total variance decreases from T={t1} to T={t2} at log-moneyness {k}")]
    CalendarArbitrage { t1: f64, t2: f64, k: f64 },

    #[error("degenerate surface: Dupire denominator below threshold on {:.1}% of nodes", .fraction * 100.0)]
    DegenerateSurface { fraction: f64 },

    #[error("stability failure: {0}")]
    StabilityFailure(String),

    #[error("denominator of the nonlocal ratio is {value:e} at S index {s_index}")]
    DegenerateDenominator { s_index: usize, value: f64 },

    #[error("assembled operator is not elliptic (K2 = {k2:e})")]
    NonElliptic { k2: f64 },

    #[error("tridiagonal pivot {0:e} below guard")]
    SingularPivot(f64),

    #[error("density leaves the X-set lower bound: min {min:e} < {bound:e}")]
    XSetViolation { min: f64, bound: f64 },

    #[error("fixed point did not converge after {} iterations", .0.iterations)]
    NotConverged(Box<FixedPointReport>),

    #[error("iterate {iteration} left the X-set")]
    MembershipLost {
        iteration: usize,
        report: Box<FixedPointReport>,
    },

    #[error("no workable horizon after {halvings} halvings")]
    HorizonExhausted {
        halvings: usize,
        report: Box<FixedPointReport>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
