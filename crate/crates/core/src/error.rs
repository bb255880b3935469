use thiserror::Error;

/// Errors raised by the branching-process library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GwError {
    #[error("invalid offspring distribution: {0}")]
    InvalidDistribution(String),

    #[error("cannot parse offspring spec `{spec}`: {reason}")]
    DistributionSpec { spec: String, reason: String },

    #[error("invalid generation series: {0}")]
    InvalidSeries(String),

    #[error("invalid offspring counts: {0}")]
    InvalidCounts(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("generation {generation} reached {size} individuals, above the cap of {cap}")]
    PopulationExplosion { generation: usize, size: u64, cap: u64 },

    #[error("extinction root finding did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("offspring size {size} lies outside the prior support {{0..{max}}}")]
    SupportMismatch { size: usize, max: usize },

    #[error("infeasible row: {parents} parents cannot produce {children} children with offspring sizes up to {k}")]
    Infeasible { parents: u64, children: u64, k: usize },

    #[error("accept-reject gave up after {attempts} attempts (generation {generation})")]
    RetriesExhausted { generation: usize, attempts: u64 },

    #[error("empty chain")]
    EmptyChain,

    #[error("{context}: {message}")]
    Input { context: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GwError {
    fn from(err: std::io::Error) -> Self {
        GwError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GwError>;
