use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "numeric failure: {what} ({rows}x{cols} matrix, frobenius norm {frobenius:e}, max |entry| {max_abs:e})"
    )]
    NumericFailure {
        what: String,
        rows: usize,
        cols: usize,
        frobenius: f64,
        max_abs: f64,
    },

    #[error(
        "rejection budget exhausted after {proposals} proposals ({accepted} accepted, rate {rate:e})"
    )]
    BudgetExhausted {
        proposals: u64,
        accepted: u64,
        rate: f64,
    },

    #[error("sampler produced no accepted points")]
    EmptySupport,

    #[error("capacity exceeded: {what} would need {requested:e} points (limit {limit:e}); use a coarser radius")]
    Capacity {
        what: String,
        requested: f64,
        limit: f64,
    },

    #[error("level {level}: {source}")]
    Level {
        level: usize,
        #[source]
        source: Box<LabError>,
    },

    #[error("degenerate estimate: {0}")]
    DegenerateEstimate(String),

    #[error("degenerate packing: only {0} point(s) retained")]
    DegeneratePacking(usize),

    #[error("i/o: {0}")]
    Io(String),

    #[error("iteration diverged after {} iterations (last residual {:e})", .trace.len(), .trace.last().copied().unwrap_or(f64::NAN))]
    Diverged { trace: Vec<f64> },
}

impl LabError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        LabError::InvalidInput(msg.into())
    }

    pub(crate) fn at_level(self, level: usize) -> Self {
        LabError::Level {
            level,
            source: Box::new(self),
        }
    }

    /// True for failures caused by the caller's parameters rather than by the numerics.
    pub fn is_invalid_input(&self) -> bool {
        match self {
            LabError::InvalidInput(_) => true,
            LabError::Level { source, .. } => source.is_invalid_input(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
