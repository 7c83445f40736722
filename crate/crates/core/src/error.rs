use thiserror::Error;

/// Errors raised by the matching library.
///
/// The variants are grouped so that a front end can map them onto distinct
/// exit statuses: configuration problems, engine size caps, and numerical
/// failures.
#[derive(Debug, Error)]
pub enum MatchError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} = {value} outside domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("eps = {eps} outside the tabulated support [{lo}, {hi}]")]
    OutOfSupport { eps: f64, lo: f64, hi: f64 },

    #[error("{engine}: problem size {size} exceeds cap {cap}")]
    SizeCap {
        engine: &'static str,
        size: u128,
        cap: u128,
    },

    #[error("quadrature did not converge: residual {residual:e} > tol {tol:e}")]
    Quadrature { residual: f64, tol: f64 },

    #[error("rejection sampler exhausted {attempts} attempts")]
    SamplingBudget { attempts: u64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("window too small: {0}")]
    WindowTooSmall(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl MatchError {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            MatchError::SizeCap { .. } | MatchError::WindowTooSmall(_) => 3,
            MatchError::Quadrature { .. }
            | MatchError::Numeric(_)
            | MatchError::SamplingBudget { .. } => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, MatchError>;
