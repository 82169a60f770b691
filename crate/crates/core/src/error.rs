use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Bounded-variation model whose paths would be nondecreasing.
    #[error("model is a subordinator: sigma = 0 requires drift_d > 0 (got {drift_d})")]
    NotSubordinatorViolation { drift_d: f64 },

    #[error("invalid phase-type representation: {0}")]
    InvalidPhaseType(String),

    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("resolvent (sI - T)^-1 is singular or near-singular at s = {re} + {im}i")]
    SingularResolvent { re: f64, im: f64 },

    #[error("no sign change of psi(s) - q found below s = {limit}")]
    BracketFailure { limit: f64 },

    #[error("roots {first} and {second} of psi(s) = q are not distinct")]
    MultipleRootDetected { first: String, second: String },

    #[error("inversion contour shift {shift} does not exceed Phi(q) + 0.5 = {required}")]
    ContourTooClose { shift: f64, required: f64 },

    #[error("injection cost must satisfy phi > 1 (got {0})")]
    InvalidCost(f64),

    #[error("x = {0} coincides with a knot; request a one-sided limit")]
    KnotEvaluation(f64),

    #[error("simulation config: {0}")]
    ConfigError(String),

    #[error("malformed data file: {0}")]
    Data(String),
}
