use thiserror::Error;

/// Errors raised by the numerical toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown dispersion relation `{0}`")]
    UnknownRelation(String),

    #[error("invalid phase expression `{expr}`: {reason}")]
    Expression { expr: String, reason: String },

    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    #[error("sample grid touches r = 0 (phase is only smooth away from the origin)")]
    GridTouchesOrigin,

    #[error("unsupported Bessel order {0} (integer or half-integer in [-1/2, 4] expected)")]
    UnsupportedOrder(f64),

    #[error("unsupported dimension n = {0}")]
    UnsupportedDimension(usize),

    #[error("negative radius {0}")]
    NegativeRadius(f64),

    #[error("non-finite integrand sample at r = {0}")]
    NonFinite(f64),

    #[error("invalid samples: {0}")]
    InvalidSamples(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("not admissible: {0}")]
    Inadmissible(String),

    #[error("nonlinearity |u|^(1+kappa) overflowed at iterate {iterate} (data not small)")]
    Overflow { iterate: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn out_of_range(what: &'static str, detail: impl Into<String>) -> Error {
    Error::OutOfRange {
        what,
        detail: detail.into(),
    }
}
