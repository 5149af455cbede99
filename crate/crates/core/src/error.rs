use thiserror::Error;

/// Errors raised by the sampling machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The two-coin loop hit its debug cap. Exactness is void for this step.
    #[error(
        "two-coin loop cap of {cap} reached (log weights {log_weight_a:.4}, {log_weight_b:.4})"
    )]
    LoopCapExceeded {
        cap: u64,
        log_weight_a: f64,
        log_weight_b: f64,
    },

    #[error("log weight must be finite, got {0}")]
    InvalidWeight(f64),

    /// The alternating series could not certify a decision within its budget.
    #[error("series did not converge: {0}")]
    NonConvergence(String),

    #[error("value {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },

    /// A layer band reaches outside the model's state space.
    #[error("interval {interval}: band [{lower}, {upper}] not inside the model domain")]
    DomainExcursion {
        interval: usize,
        lower: f64,
        upper: f64,
    },

    /// A certified potential bound was contradicted by an evaluation.
    #[error("potential value {value} outside certified bounds [{inf}, {sup}]")]
    BoundViolation { value: f64, inf: f64, sup: f64 },

    #[error("trace is degenerate: {0}")]
    DegenerateTrace(String),

    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
