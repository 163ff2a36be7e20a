//! Finite-dimensional spectral truncations of the two reference control
//! systems on `O = (0,1)`:
//!
//! * `HeatBoundary` — heat equation with Dirichlet boundary control. State
//!   coefficients are taken in the orthonormal sine eigenbasis
//!   `e_j = √2 sin(jπξ)` with Laplacian eigenvalues `λ_j = (jπ)²`. The control
//!   operator is the Dirichlet-lift composition `B = -Ā D`, which lands in the
//!   weighted dual space `H̄` rather than `H`; the noise covariance is
//!   `Q = (-A)^{-2β}`.
//! * `WaveDistributed` — wave equation with distributed control on the
//!   velocity component and finite-rank noise. The internal coordinates are
//!   energy coordinates `(c κ_j u_j, v_j)` per mode, in which the energy norm
//!   is Euclidean and the semigroup acts as a rotation per mode.
//!
//! In the internal coordinates the `H` inner product is the plain dot product
//! for both models, so projections, covariances and adjoints reduce to
//! ordinary matrix algebra.

mod heat;
mod wave;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, SymmetricRoot};

/// Which reference system the truncation models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    HeatBoundary,
    WaveDistributed,
}

/// Space tag for a coefficient vector: the state space `H` or the extended
/// space `H̄` (dual of `D((-A)^{3/4+ε})` for the heat model; `H̄ = H` for the
/// wave model, whose control operator is bounded).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateSpace {
    H,
    HBar,
}

/// A state in internal (H-orthonormal) coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub coeffs: DVector<f64>,
    pub space: StateSpace,
}

impl StateVector {
    pub fn new(coeffs: DVector<f64>, space: StateSpace) -> Self {
        StateVector { coeffs, space }
    }

    pub fn zeros(dim: usize) -> Self {
        StateVector::new(DVector::zeros(dim), StateSpace::H)
    }
}

/// How the selection operator `P` is specified.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProjectionSpec {
    /// Heat: `v_i = e_{indices[i]}` (1-based eigenfunction indices).
    Eigenfunctions { indices: Vec<usize> },
    /// Wave: spectral projection onto the first `count` modes
    /// (rank `2·count`).
    Modes { count: usize },
    /// Heat: explicit eigenbasis coefficient lists (padded with zeros up to
    /// the truncation level).
    Vectors { vectors: Vec<Vec<f64>> },
}

/// Declarative model configuration (TOML/JSON friendly).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Truncation level `N_H` (retained Laplacian modes).
    pub dim_h: usize,
    /// Control space dimension `m` (heat: 1 or 2 boundary points; wave: modes
    /// driven by the distributed control).
    pub dim_k: usize,
    /// Noise coloring exponent in `Q = (-A)^{-2β}` (heat).
    #[serde(default)]
    pub beta: f64,
    /// Projection regularity exponent; must satisfy `α > β + 1/4` (heat).
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Estimate exponent parameter, in `(0, 1/4)` (heat).
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Propagation speed `c > 0` (wave).
    #[serde(default = "default_wave_speed")]
    pub wave_speed: f64,
    /// Scalar multiplier on the noise operator; 0 switches the noise off.
    #[serde(default = "default_noise_scale")]
    pub noise_scale: f64,
    /// Noise coefficient rows `σ_i ∈ R^{N_H}` (wave); identity when omitted.
    #[serde(default)]
    pub sigma: Option<Vec<Vec<f64>>>,
    pub projection: ProjectionSpec,
    /// Orthonormalize the projection vectors (default). With `false` the
    /// literal map `x ↦ Σ ⟨x,v_i⟩ v_i` is kept, which is only a true
    /// projection for orthonormal `v_i`.
    #[serde(default = "default_true")]
    pub orthonormalize: bool,
}

fn default_alpha() -> f64 {
    0.6
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_wave_speed() -> f64 {
    1.0
}
fn default_noise_scale() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}

impl ModelConfig {
    /// Heat defaults: `N_H = 64`, both boundary points controlled,
    /// `β = 0, α = 0.6, ε = 0.1`, projection onto the first eigenfunction.
    pub fn heat_default() -> Self {
        ModelConfig {
            kind: ModelKind::HeatBoundary,
            dim_h: 64,
            dim_k: 2,
            beta: 0.0,
            alpha: 0.6,
            epsilon: 0.1,
            wave_speed: 1.0,
            noise_scale: 1.0,
            sigma: None,
            projection: ProjectionSpec::Eigenfunctions { indices: vec![1] },
            orthonormalize: true,
        }
    }

    /// Wave defaults: 16 modes, identity noise, spectral projection onto the
    /// first two modes.
    pub fn wave_default() -> Self {
        ModelConfig {
            kind: ModelKind::WaveDistributed,
            dim_h: 16,
            dim_k: 16,
            beta: 0.0,
            alpha: 0.6,
            epsilon: 0.1,
            wave_speed: 1.0,
            noise_scale: 1.0,
            sigma: None,
            projection: ProjectionSpec::Modes { count: 2 },
            orthonormalize: true,
        }
    }
}

/// A constructed spectral truncation: generator, semigroup, noise, control
/// and selection operator, with derived arrays precomputed and the
/// construction-time invariants checked.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    pub kind: ModelKind,
    /// Retained Laplacian modes `N_H`.
    pub dim_h: usize,
    /// Rank of the projection `P`.
    pub dim_p: usize,
    /// Control space dimension `m`.
    pub dim_k: usize,
    /// Laplacian eigenvalues `λ_j = (jπ)²`, strictly increasing.
    pub eigenvalues: DVector<f64>,
    pub beta: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub wave_speed: f64,
    pub noise_scale: f64,
    /// Wave noise coefficients (`noise_dim × N_H`).
    pub(crate) sigma: Option<DMatrix<f64>>,
    /// Projection vectors as columns, in internal coordinates.
    pub(crate) projection_vectors: DMatrix<f64>,
    /// Gram matrix of the projection vectors and its condition number.
    pub gram_condition: f64,
    /// Whether `P` commutes with the semigroup (spectral projection).
    pub commuting: bool,
    /// Weight exponent `3/4 + ε` of the extended-space norm.
    pub extended_weight_exponent: f64,
    /// Per-coordinate `H̄` weights (heat: `λ_j^{-(3/4+ε)}`; wave: 1).
    pub(crate) hbar_weights: DVector<f64>,
    /// Smallest eigenvalue of the projected noise Gram matrix (wave check).
    pub projected_noise_min_eigenvalue: Option<f64>,
}

impl SpectralModel {
    /// Builds a model from its configuration, running the construction-time
    /// invariant checks.
    pub fn new(config: &ModelConfig) -> Result<Self> {
        if config.dim_h == 0 {
            return Err(Error::InvalidConfig("dim_h must be positive".into()));
        }
        let n_h = config.dim_h;
        let eigenvalues =
            DVector::from_fn(n_h, |j, _| ((j + 1) as f64 * std::f64::consts::PI).powi(2));

        match config.kind {
            ModelKind::HeatBoundary => heat::validate(config)?,
            ModelKind::WaveDistributed => wave::validate(config)?,
        }

        let state_dim = match config.kind {
            ModelKind::HeatBoundary => n_h,
            ModelKind::WaveDistributed => 2 * n_h,
        };

        let (raw_vectors, commuting) = build_projection_vectors(config, state_dim)?;
        let gram = raw_vectors.transpose() * &raw_vectors;
        let gram_condition = condition_number(&gram)?;
        let projection_vectors = if config.orthonormalize {
            orthonormalize(&raw_vectors)?
        } else {
            raw_vectors
        };

        let sigma = match config.kind {
            ModelKind::WaveDistributed => Some(wave::sigma_matrix(config)?),
            ModelKind::HeatBoundary => None,
        };

        let extended_weight_exponent = 0.75 + config.epsilon;
        let hbar_weights = match config.kind {
            ModelKind::HeatBoundary => {
                eigenvalues.map(|l: f64| l.powf(-extended_weight_exponent))
            }
            ModelKind::WaveDistributed => DVector::from_element(state_dim, 1.0),
        };

        let model = SpectralModel {
            kind: config.kind,
            dim_h: n_h,
            dim_p: projection_vectors.ncols(),
            dim_k: config.dim_k,
            eigenvalues,
            beta: config.beta,
            alpha: config.alpha,
            epsilon: config.epsilon,
            wave_speed: config.wave_speed,
            noise_scale: config.noise_scale,
            sigma,
            projection_vectors,
            gram_condition,
            commuting,
            extended_weight_exponent,
            hbar_weights,
            projected_noise_min_eigenvalue: None,
        };

        let projected_noise_min_eigenvalue = match config.kind {
            ModelKind::WaveDistributed => Some(wave::check_projected_noise(config, &model)?),
            ModelKind::HeatBoundary => None,
        };

        Ok(SpectralModel {
            projected_noise_min_eigenvalue,
            ..model
        })
    }

    /// Internal coordinate dimension (`N_H` heat, `2·N_H` wave).
    pub fn state_dim(&self) -> usize {
        match self.kind {
            ModelKind::HeatBoundary => self.dim_h,
            ModelKind::WaveDistributed => 2 * self.dim_h,
        }
    }

    /// Noise space dimension.
    pub fn noise_dim(&self) -> usize {
        match &self.sigma {
            Some(s) => s.nrows(),
            None => self.dim_h,
        }
    }

    /// Semigroup type `ω` (both models are contraction semigroups).
    pub fn semigroup_type(&self) -> f64 {
        0.0
    }

    // ── Semigroup ───────────────────────────────────────────────────

    /// Applies `e^{tA}` coordinate-wise. Heat: `x_j ↦ e^{-λ_j t} x_j`; wave:
    /// rotation blocks per mode in energy coordinates.
    pub fn semigroup_apply(&self, t: f64, x: &StateVector) -> Result<StateVector> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        self.check_state_dim(x.coeffs.len())?;
        let coeffs = match self.kind {
            ModelKind::HeatBoundary => heat::semigroup_apply(self, t, &x.coeffs),
            ModelKind::WaveDistributed => wave::semigroup_apply(self, t, &x.coeffs),
        };
        Ok(StateVector::new(coeffs, x.space))
    }

    /// Dense `e^{tA}` in internal coordinates.
    pub fn semigroup_matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        Ok(match self.kind {
            ModelKind::HeatBoundary => heat::semigroup_matrix(self, t),
            ModelKind::WaveDistributed => wave::semigroup_matrix(self, t),
        })
    }

    // ── Noise ───────────────────────────────────────────────────────

    /// Noise operator `G` as a `state_dim × noise_dim` matrix.
    pub fn noise_matrix(&self) -> DMatrix<f64> {
        match self.kind {
            ModelKind::HeatBoundary => heat::noise_matrix(self),
            ModelKind::WaveDistributed => wave::noise_matrix(self),
        }
    }

    /// Closed-form covariance `Q_t = ∫_0^t e^{sA} G G* e^{sA*} ds` in internal
    /// coordinates.
    pub fn covariance_full(&self, t: f64) -> Result<DMatrix<f64>> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        Ok(match self.kind {
            ModelKind::HeatBoundary => heat::covariance_full(self, t),
            ModelKind::WaveDistributed => wave::covariance_full(self, t),
        })
    }

    /// Projected covariance `Q̄_t = P Q_t P*` in the `v_i` coordinates,
    /// together with its clamped symmetric square-root factor. Degenerate
    /// covariances are allowed; the factor reports the retained rank.
    pub fn covariance_projected(&self, t: f64) -> Result<(DMatrix<f64>, SymmetricRoot)> {
        let q = self.covariance_full(t)?;
        let v = &self.projection_vectors;
        let qbar = v.transpose() * q * v;
        let sym = (&qbar + qbar.transpose()) * 0.5;
        let root = SymmetricRoot::new(&sym);
        Ok((sym, root))
    }

    /// Covariance by composite trapezoid quadrature of the defining integral
    /// `∫_0^t e^{sA} G G* e^{sA*} ds`. Independent route from the closed form;
    /// used as a test oracle and inside the lifted smoothing check.
    pub fn covariance_by_quadrature(&self, t: f64, panels: usize) -> Result<DMatrix<f64>> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let g = self.noise_matrix();
        let gg = &g * g.transpose();
        let dim = self.state_dim();
        let mut acc = DMatrix::zeros(dim, dim);
        let h = t / panels as f64;
        for i in 0..=panels {
            let s = i as f64 * h;
            let e = self.semigroup_matrix(s)?;
            let w = if i == 0 || i == panels { 0.5 } else { 1.0 };
            acc += &e * &gg * e.transpose() * (w * h);
        }
        Ok(acc)
    }

    // ── Control ─────────────────────────────────────────────────────

    /// Control operator `B` as a `state_dim × m` matrix (heat entries grow
    /// like `j`, reflecting that `B` maps into `H̄`).
    pub fn control_matrix(&self) -> DMatrix<f64> {
        match self.kind {
            ModelKind::HeatBoundary => heat::control_matrix(self),
            ModelKind::WaveDistributed => wave::control_matrix(self),
        }
    }

    /// Applies `B` to a control vector; the result is tagged `H̄`.
    pub fn control_apply(&self, u: &DVector<f64>) -> Result<StateVector> {
        if u.len() != self.dim_k {
            return Err(Error::DimensionMismatch {
                expected: self.dim_k,
                got: u.len(),
            });
        }
        let coeffs = self.control_matrix() * u;
        Ok(StateVector::new(coeffs, StateSpace::HBar))
    }

    // ── Projection ──────────────────────────────────────────────────

    /// The coordinate tuple `(⟨x,v_1⟩, …, ⟨x,v_n⟩)`.
    pub fn projection_apply(&self, x: &StateVector) -> Result<DVector<f64>> {
        self.check_state_dim(x.coeffs.len())?;
        Ok(self.projection_vectors.transpose() * &x.coeffs)
    }

    /// Dense `P: x ↦ Σ ⟨x,v_i⟩ v_i` in internal coordinates.
    pub fn projector_matrix(&self) -> DMatrix<f64> {
        &self.projection_vectors * self.projection_vectors.transpose()
    }

    /// Projection vectors as columns (internal coordinates).
    pub fn projection_basis(&self) -> &DMatrix<f64> {
        &self.projection_vectors
    }

    /// Projected semigroup block `A_P(t) = [⟨e^{tA} v_k, v_i⟩]`; for a
    /// spectral projection this is exactly the action of `e^{tA}` on `Im P`.
    pub fn projected_semigroup(&self, t: f64) -> Result<DMatrix<f64>> {
        let e = self.semigroup_matrix(t)?;
        let v = &self.projection_vectors;
        Ok(v.transpose() * e * v)
    }

    /// Projected control matrix `P∘B` in coordinates: `[⟨B e_l, v_i⟩]`.
    pub fn projected_control(&self) -> DMatrix<f64> {
        self.projection_vectors.transpose() * self.control_matrix()
    }

    /// `P e^{tA} B` in coordinates (`n × m`). The pairing converges for all
    /// `t ≥ 0` at finite truncation; for `t > 0` it approximates the
    /// continuum operator thanks to `v_i ∈ D((-A)^α)`.
    pub fn projected_drifted_control(&self, t: f64) -> Result<DMatrix<f64>> {
        let e = self.semigroup_matrix(t)?;
        Ok(self.projection_vectors.transpose() * e * self.control_matrix())
    }

    /// Max over samples of the commutator norm `‖P e^{tA} − e^{tA} P‖₂`.
    pub fn check_commutation(&self, t_samples: &[f64]) -> Result<f64> {
        let p = self.projector_matrix();
        let mut max_dev: f64 = 0.0;
        for &t in t_samples {
            let e = self.semigroup_matrix(t)?;
            let commutator = &p * &e - &e * &p;
            max_dev = max_dev.max(spectral_norm(&commutator));
        }
        Ok(max_dev)
    }

    // ── Norms ───────────────────────────────────────────────────────

    /// `H` norm (Euclidean in internal coordinates; the wave energy norm).
    pub fn h_norm(&self, x: &StateVector) -> f64 {
        x.coeffs.norm()
    }

    /// `H̄` norm: per-coordinate weights `λ_j^{-(3/4+ε)}` for the heat model,
    /// identical to the `H` norm for the wave model.
    pub fn hbar_norm(&self, x: &StateVector) -> f64 {
        x.coeffs
            .iter()
            .zip(self.hbar_weights.iter())
            .map(|(&c, &w)| (c * w) * (c * w))
            .sum::<f64>()
            .sqrt()
    }

    /// Operator norm of `P e^{tA}: H̄ → H`, the growth-hypothesis ratio
    /// `sup ‖P e^{tA} x‖_H / ‖x‖_H̄`.
    pub fn growth_ratio_norm(&self, t: f64) -> Result<f64> {
        let e = self.semigroup_matrix(t)?;
        let mut m = self.projection_vectors.transpose() * e;
        for (j, &w) in self.hbar_weights.iter().enumerate() {
            m.column_mut(j).scale_mut(1.0 / w);
        }
        Ok(spectral_norm(&m))
    }

    /// Standard deviations of the stationary projected law (heat only; the
    /// wave covariance grows linearly in `t`).
    pub fn stationary_projected_std(&self) -> Option<DVector<f64>> {
        match self.kind {
            ModelKind::HeatBoundary => {
                let q_inf = heat::covariance_stationary(self);
                let v = &self.projection_vectors;
                let qbar = v.transpose() * q_inf * v;
                Some(DVector::from_fn(self.dim_p, |i, _| qbar[(i, i)].max(0.0).sqrt()))
            }
            ModelKind::WaveDistributed => None,
        }
    }

    // ── Physical coordinates (wave) ─────────────────────────────────

    /// Builds a wave state from per-mode position/velocity coefficients
    /// `(u_j, v_j)`; energy coordinates are `(c κ_j u_j, v_j)`.
    pub fn wave_state_from_position_velocity(
        &self,
        position: &[f64],
        velocity: &[f64],
    ) -> Result<StateVector> {
        wave::state_from_position_velocity(self, position, velocity)
    }

    /// Recovers per-mode position/velocity coefficients from a wave state.
    pub fn wave_position_velocity(&self, x: &StateVector) -> Result<(Vec<f64>, Vec<f64>)> {
        wave::position_velocity(self, x)
    }

    pub(crate) fn check_state_dim(&self, got: usize) -> Result<()> {
        if got != self.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim(),
                got,
            });
        }
        Ok(())
    }
}

fn build_projection_vectors(
    config: &ModelConfig,
    state_dim: usize,
) -> Result<(DMatrix<f64>, bool)> {
    match (&config.projection, config.kind) {
        (ProjectionSpec::Eigenfunctions { indices }, ModelKind::HeatBoundary) => {
            if indices.is_empty() {
                return Err(Error::InvalidConfig("projection needs at least one vector".into()));
            }
            let mut v = DMatrix::zeros(state_dim, indices.len());
            for (i, &idx) in indices.iter().enumerate() {
                if idx == 0 || idx > config.dim_h {
                    return Err(Error::InvalidConfig(format!(
                        "eigenfunction index {idx} outside 1..={}",
                        config.dim_h
                    )));
                }
                v[(idx - 1, i)] = 1.0;
            }
            Ok((v, true))
        }
        (ProjectionSpec::Modes { count }, ModelKind::WaveDistributed) => {
            if *count == 0 || *count > config.dim_h {
                return Err(Error::InvalidConfig(format!(
                    "projected mode count {count} outside 1..={}",
                    config.dim_h
                )));
            }
            // Energy coordinates are interleaved (p_1, q_1, p_2, q_2, …);
            // the spectral projection selects whole modes.
            let n = 2 * count;
            let mut v = DMatrix::zeros(state_dim, n);
            for i in 0..n {
                v[(i, i)] = 1.0;
            }
            Ok((v, true))
        }
        (ProjectionSpec::Vectors { vectors }, ModelKind::HeatBoundary) => {
            if vectors.is_empty() {
                return Err(Error::InvalidConfig("projection needs at least one vector".into()));
            }
            let mut v = DMatrix::zeros(state_dim, vectors.len());
            for (i, coeffs) in vectors.iter().enumerate() {
                if coeffs.len() > state_dim {
                    return Err(Error::InvalidConfig(format!(
                        "projection vector {i} has {} coefficients, truncation is {state_dim}",
                        coeffs.len()
                    )));
                }
                for (j, &c) in coeffs.iter().enumerate() {
                    v[(j, i)] = c;
                }
            }
            // Spectral iff every vector is supported on a single mode and the
            // modes are distinct.
            let mut modes = Vec::new();
            let mut spectral = true;
            for i in 0..vectors.len() {
                let col = v.column(i);
                let support: Vec<usize> =
                    col.iter().enumerate().filter(|(_, &c)| c != 0.0).map(|(j, _)| j).collect();
                if support.len() != 1 || modes.contains(&support[0]) {
                    spectral = false;
                    break;
                }
                modes.push(support[0]);
            }
            Ok((v, spectral))
        }
        (spec, kind) => Err(Error::InvalidConfig(format!(
            "projection spec {spec:?} is not supported for {kind:?}"
        ))),
    }
}

/// Condition number of the Gram matrix; errors when the vectors are
/// numerically dependent.
fn condition_number(gram: &DMatrix<f64>) -> Result<f64> {
    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 || max / min > 1e12 {
        return Err(Error::InvalidConfig(format!(
            "projection vectors are numerically dependent (Gram condition {:.3e})",
            max / min.max(f64::MIN_POSITIVE)
        )));
    }
    Ok(max / min)
}

/// Modified Gram–Schmidt in the internal (H) inner product.
fn orthonormalize(v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = v.clone();
    let n = out.ncols();
    for i in 0..n {
        for k in 0..i {
            let proj = out.column(k).dot(&out.column(i));
            let prev = out.column(k).clone_owned();
            out.column_mut(i).axpy(-proj, &prev, 1.0);
        }
        let norm = out.column(i).norm();
        if norm < 1e-12 {
            return Err(Error::InvalidConfig(
                "projection vectors are linearly dependent".into(),
            ));
        }
        out.column_mut(i).scale_mut(1.0 / norm);
    }
    Ok(out)
}
