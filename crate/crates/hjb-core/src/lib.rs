//! Numerical machinery for stationary (infinite-horizon, discounted)
//! Hamilton–Jacobi–Bellman equations driven by spectrally truncated linear
//! SPDE control systems.
//!
//! The library covers the full pipeline:
//!
//! * [`model`] — finite-dimensional spectral truncations of two reference
//!   systems: a boundary-controlled heat equation and a distributed-control
//!   wave equation on `(0,1)`, together with the finite-rank selection
//!   operator `P` and the weighted extended-space norms.
//! * [`smoothing`] — the partial-smoothing operator
//!   `Λ(t) = (P Q_t P*)^{-1/2} P e^{tA} B`, its norm, the dual constant, and
//!   log–log singularity-exponent fits.
//! * [`lift`] — a discretized trajectory-lifting operator `x ↦ (t ↦ P e^{tA} x)`
//!   in a weighted `L²` space, with adjoint and lifted smoothing checks.
//! * [`quadrature`] — Gauss–Hermite tensor rules and seeded Monte Carlo for
//!   expectations against the projected Gaussian laws, including the
//!   Cameron–Martin-weighted expectations used by gradient formulas.
//! * [`ou`] — the Ornstein–Uhlenbeck transition semigroup `P_t[φ]` and its
//!   control-direction gradient `∇ᴮ P_t[φ]` for functions of the projected
//!   state.
//! * [`hjb`] — Hamiltonians, the contraction threshold for the discount
//!   factor, and the Picard fixed-point solve producing the value function
//!   and its control-direction gradient.
//! * [`synthesis`] — feedback-map construction, closed-loop simulation with
//!   exponential-Euler stepping, Monte Carlo cost evaluation, and empirical
//!   verification of the fundamental identity.

pub mod error;
pub mod grid;
pub mod hjb;
pub mod lift;
pub mod linalg;
pub mod model;
pub mod ou;
pub mod presets;
pub mod quadrature;
pub mod seed;
pub mod smoothing;
pub mod synthesis;

pub use error::{Error, Result};
pub use grid::{GridSpec, ScalarGrid, VectorGrid};
pub use model::{ModelConfig, ModelKind, SpectralModel, StateSpace, StateVector};
