use std::fmt;

use thiserror::Error;

/// A single failed configuration check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", join(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("topology: {0}")]
    Topology(String),

    #[error("power allocation did not converge after {iterations} iterations (budget residual {residual:e} W)")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("slot {slot}, UE {ue}: {source}")]
    AtSlot {
        slot: u64,
        ue: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("GPD fit needs at least {required} exceedances, got {got}")]
    InsufficientSamples { required: usize, got: usize },

    #[error("GPD fit: sample variance is not positive")]
    DegenerateVariance,

    #[error("sweep: {0}")]
    Sweep(String),

    #[error("config parse: {0}")]
    Parse(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the error (possibly wrapped with slot context) is a solver failure.
    pub fn is_non_convergence(&self) -> bool {
        match self {
            Error::NonConvergence { .. } => true,
            Error::AtSlot { source, .. } => source.is_non_convergence(),
            _ => false,
        }
    }
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
