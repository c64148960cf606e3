use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cutoff exceeded: requested {requested}, limit {limit}")]
    CutoffExceeded { requested: usize, limit: usize },

    #[error("cutoff too low: tail mass {tail:.3e} above {limit:.1e}")]
    CutoffTooLow { tail: f64, limit: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid mode index {index} for {n_modes}-mode state")]
    InvalidMode { index: usize, n_modes: usize },

    #[error("degenerate covariance matrix")]
    DegenerateCovariance,

    #[error("unphysical covariance matrix: smallest eigenvalue of cov + i*omega is {0:.3e}")]
    Unphysical(f64),

    #[error("undefined statistic: {0}")]
    Undefined(&'static str),

    #[error("precision loss in alternating sum: error bound {bound:.3e}")]
    PrecisionLoss { bound: f64 },

    #[error("insufficient counts: {0}")]
    InsufficientCounts(&'static str),

    #[error("no herald events")]
    NoHeraldEvents,

    #[error("root finding failed: {0}")]
    RootNotFound(String),

    #[error("threshold curve unresolved: {dropped} of {total} grid points dropped")]
    CurveUnresolved { dropped: usize, total: usize },

    #[error("out of certified domain: error probability {error:.3e} beyond {limit:.3e}")]
    OutOfDomain { error: f64, limit: f64 },

    #[error("linearization invalid: negative entry {0:.3e}")]
    LinearizationInvalid(f64),

    #[error("heating divergence: tail mass {0:.3e}")]
    HeatingDivergence(f64),

    #[error("no crossing in range: {0}")]
    NoCrossing(&'static str),

    #[error("search range exhausted below {0}")]
    RangeExhausted(f64),

    #[error("incompatible scheme: {0}")]
    IncompatibleScheme(String),

    #[error("optimizer stagnation: {0}")]
    Stagnation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("{name}={x} outside [0,1]")));
    }
    Ok(())
}

pub(crate) fn check_nonneg(name: &str, x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("{name}={x} must be finite and >= 0")));
    }
    Ok(())
}
