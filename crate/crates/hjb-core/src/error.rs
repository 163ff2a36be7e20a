//! Crate-wide error type.

/// Errors surfaced by model construction, estimate evaluation, the HJB solve
/// and the closed-loop simulation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Exponent parameters violate the construction preconditions
    /// (`α > β + 1/4`, `ε ∈ (0, 1/4)`).
    #[error("invalid exponents: {0}")]
    InvalidExponents(String),

    /// The projected noise Gram matrix is not positive definite on the
    /// retained modes.
    #[error("degenerate noise: smallest projected noise eigenvalue {0:.3e} <= 1e-12")]
    DegenerateNoise(f64),

    /// A vector argument has the wrong length.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Semigroup evaluation requested at a negative time.
    #[error("negative time: t = {0}")]
    NegativeTime(f64),

    /// The range inclusion `Im(P e^{tA} B) ⊆ Im(Q̄_t^{1/2})` fails numerically:
    /// the reconstruction residual exceeds the tolerance.
    #[error("range violation at t = {t:.3e}: residual {residual:.3e} > {tolerance:.3e}")]
    RangeViolation {
        t: f64,
        residual: f64,
        tolerance: f64,
    },

    /// Lift weight exponent does not dominate the semigroup type.
    #[error("bad weight: rho = {rho} must exceed the semigroup type {omega}")]
    BadWeight { rho: f64, omega: f64 },

    /// The matrix pencil for the duality constant is degenerate.
    #[error("degenerate pencil: projected covariance is rank-deficient at t = {0:.3e}")]
    DegeneratePencil(f64),

    /// An integrand returned a non-finite value at a quadrature node/sample.
    #[error("non-finite integrand at {0:?}")]
    NonFiniteIntegrand(Vec<f64>),

    /// A control vector lies outside the admissible set.
    #[error("control out of set: {0}")]
    ControlOutOfSet(String),

    /// Singularity exponent outside `[0, 1)`.
    #[error("bad exponent: gamma = {0} must lie in [0, 1)")]
    BadExponent(f64),

    /// No discount factor below the search cap certifies the contraction.
    #[error("no contraction threshold found below lambda = {0:.3e}")]
    NoThreshold(f64),

    /// Picard residual ratio exceeded 1 for three consecutive iterations.
    #[error("fixed-point iteration is not contracting (residual {residual:.3e} at iteration {iteration})")]
    NotContracted { iteration: usize, residual: f64 },

    /// A simulated state coefficient exceeded the blow-up guard.
    #[error("unstable step: |state| = {magnitude:.3e} at t = {t:.3e} (reduce dt or check the model)")]
    UnstableStep { t: f64, magnitude: f64 },

    /// Configuration is structurally invalid (bad dimensions, degenerate
    /// projection vectors, unsupported combinations).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
