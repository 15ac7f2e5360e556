use thiserror::Error;

/// Errors raised by the manipulator model and its solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("cannot compose an empty list of poses")]
    EmptyComposition,

    #[error("arc fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("degenerate point set: {0}")]
    DegeneratePoints(&'static str),

    #[error("segment index {index} out of range ({count} segments)")]
    SegmentOutOfRange { index: usize, count: usize },

    #[error("arc length {arc_length:.3} mm differs from segment rest length {rest_length:.3} mm by more than 2%")]
    ArcLengthMismatch { arc_length: f64, rest_length: f64 },

    #[error("zero baseline: percent reduction is undefined")]
    ZeroBaseline,

    #[error("pose not reached: residual {residual:.3e} rad after {iterations} iterations")]
    PoseNotReached { residual: f64, iterations: usize },

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("{0}")]
    Protocol(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
