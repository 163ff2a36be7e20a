//! Discretized trajectory lifting.
//!
//! The lifting map sends a state `x` to its projected trajectory
//! `t ↦ P e^{tA} x`, viewed as an element of the weighted space `L²_ρ` with
//! norm `‖f‖² = ∫_0^∞ e^{-2ρt} |f(t)|²_H dt`. Discretized on a geometric node
//! grid with trapezoid-in-log weights, the lift becomes a tall block matrix
//! whose rows are `√w_i e^{-ρ t_i} (P e^{t_i A})`; the discrete adjoint is
//! then exact by construction and the lifted smoothing operator
//! `Λ̂(t) = (Υ Q_t Υ*)^{-1/2} Υ e^{tA} B` can be formed and compared against
//! the unlifted one.
//!
//! When `P` commutes with the semigroup the lift factors through `P`, so any
//! discretization that uses the closed-form `Q_t` reproduces the unlifted
//! norm up to rounding. To keep the comparison a genuine two-route check, the
//! lifted route evaluates `Q_t` by trapezoid quadrature of its defining
//! integral with a panel count tied to the node count; the lifted/unlifted
//! gap is then an honest discretization error that shrinks under node
//! doubling.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, SymmetricRoot};
use crate::model::SpectralModel;

/// Node grid and quadrature weights for the discretized `L²_ρ` norm.
#[derive(Debug, Clone)]
pub struct LiftDiscretization {
    pub time_nodes: Vec<f64>,
    pub quad_weights: Vec<f64>,
    pub rho: f64,
}

impl LiftDiscretization {
    /// Geometric nodes on `[t_min, t_max]` with trapezoid weights in the log
    /// variable (`dt = t d(log t)`).
    pub fn geometric(model: &SpectralModel, n_nodes: usize, t_min: f64, t_max: f64, rho: f64) -> Result<Self> {
        if rho <= model.semigroup_type() {
            return Err(Error::BadWeight { rho, omega: model.semigroup_type() });
        }
        if !(t_min > 0.0 && t_max > t_min && n_nodes >= 2) {
            return Err(Error::InvalidConfig("need 0 < t_min < t_max and >= 2 nodes".into()));
        }
        let log_min = t_min.ln();
        let h = (t_max.ln() - log_min) / (n_nodes - 1) as f64;
        let time_nodes: Vec<f64> = (0..n_nodes).map(|i| (log_min + i as f64 * h).exp()).collect();
        let quad_weights: Vec<f64> = (0..n_nodes)
            .map(|i| {
                let boundary = i == 0 || i == n_nodes - 1;
                time_nodes[i] * h * if boundary { 0.5 } else { 1.0 }
            })
            .collect();
        Ok(LiftDiscretization { time_nodes, quad_weights, rho })
    }

    /// Default discretization: 80 nodes on `[1e-6, 20/ρ]`, `ρ = 1`.
    pub fn default_for(model: &SpectralModel) -> Result<Self> {
        let rho = 1.0;
        Self::geometric(model, 80, 1e-6, 20.0 / rho, rho)
    }

    /// Same grid with twice the node count (refinement studies).
    pub fn refined(&self, model: &SpectralModel) -> Result<Self> {
        Self::geometric(
            model,
            2 * self.time_nodes.len(),
            self.time_nodes[0],
            *self.time_nodes.last().unwrap(),
            self.rho,
        )
    }

    pub fn len(&self) -> usize {
        self.time_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_nodes.is_empty()
    }
}

/// The discretized lift as a `(n·|nodes|) × state_dim` block matrix.
pub fn lift_matrix(model: &SpectralModel, disc: &LiftDiscretization) -> Result<DMatrix<f64>> {
    let n = model.dim_p;
    let state = model.state_dim();
    let mut out = DMatrix::zeros(n * disc.len(), state);
    let v_t = model.projection_basis().transpose();
    for (i, (&t, &w)) in disc.time_nodes.iter().zip(&disc.quad_weights).enumerate() {
        let factor = w.sqrt() * (-disc.rho * t).exp();
        let block = &v_t * model.semigroup_matrix(t)?;
        out.view_mut((i * n, 0), (n, state)).copy_from(&(block * factor));
    }
    Ok(out)
}

/// Projected trajectory values `y_i = P e^{t_i A} x` (coordinates, unweighted).
pub fn lift_apply(
    model: &SpectralModel,
    disc: &LiftDiscretization,
    x: &DVector<f64>,
) -> Result<Vec<DVector<f64>>> {
    let v_t = model.projection_basis().transpose();
    disc.time_nodes
        .iter()
        .map(|&t| Ok(&v_t * (model.semigroup_matrix(t)? * x)))
        .collect()
}

/// Discretized `‖Υ x‖²_{L²_ρ} = Σ w_i e^{-2ρ t_i} |P e^{t_i A} x|²`.
pub fn lift_norm_sq(
    model: &SpectralModel,
    disc: &LiftDiscretization,
    x: &DVector<f64>,
) -> Result<f64> {
    let ys = lift_apply(model, disc, x)?;
    Ok(disc
        .time_nodes
        .iter()
        .zip(&disc.quad_weights)
        .zip(&ys)
        .map(|((&t, &w), y)| w * (-2.0 * disc.rho * t).exp() * y.norm_squared())
        .sum())
}

/// Discrete adjoint identity residual.
///
/// The lifted object is represented as the weighted trajectory
/// `ỹ(t) = e^{-ρt} P e^{tA} x` in the plain quadrature space, so the pairing
/// is `⟨Υx, z⟩ = Σ_i w_i e^{-ρ t_i} ⟨y_i, z_i⟩` and the adjoint is
/// `Υ* z = Σ_i w_i e^{-ρ t_i} e^{t_i A*} P* z_i`. Both sides share the
/// quadrature, so the relative residual is rounding-level.
pub fn lift_adjoint_check(
    model: &SpectralModel,
    disc: &LiftDiscretization,
    z: &[DVector<f64>],
    x: &DVector<f64>,
) -> Result<f64> {
    if z.len() != disc.len() {
        return Err(Error::DimensionMismatch { expected: disc.len(), got: z.len() });
    }
    let ys = lift_apply(model, disc, x)?;
    let mut lhs = 0.0;
    for ((&t, &w), (y, zi)) in disc.time_nodes.iter().zip(&disc.quad_weights).zip(ys.iter().zip(z))
    {
        lhs += w * (-disc.rho * t).exp() * y.dot(zi);
    }

    let v = model.projection_basis();
    let mut adj = DVector::zeros(model.state_dim());
    for ((&t, &w), zi) in disc.time_nodes.iter().zip(&disc.quad_weights).zip(z) {
        // e^{tA*} = e^{tA}ᵀ in the orthonormal internal coordinates.
        let pulled = model.semigroup_matrix(t)?.transpose() * (v * zi);
        adj.axpy(w * (-disc.rho * t).exp(), &pulled, 1.0);
    }
    let rhs = x.dot(&adj);

    let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    Ok((lhs - rhs).abs() / scale)
}

/// Norm of the discretized lifted smoothing operator
/// `Λ̂(t) = (Υ Q_t Υ*)^{-1/2} Υ e^{tA} B`.
///
/// `Q_t` is evaluated by trapezoid quadrature with `|nodes|` panels (the
/// independent route; see the module docs), so for commuting `P` the result
/// approaches the unlifted `‖Λ(t)‖` as the discretization refines.
pub fn lifted_lambda_norm(
    model: &SpectralModel,
    disc: &LiftDiscretization,
    t: f64,
) -> Result<f64> {
    let (lambda, _residual) = lifted_lambda_operator(model, disc, t)?;
    Ok(spectral_norm(&lambda))
}

/// The lifted operator itself with its range residual.
pub fn lifted_lambda_operator(
    model: &SpectralModel,
    disc: &LiftDiscretization,
    t: f64,
) -> Result<(DMatrix<f64>, f64)> {
    if t <= 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let upsilon = lift_matrix(model, disc)?;
    let q = model.covariance_by_quadrature(t, disc.len())?;
    let m_hat = &upsilon * q * upsilon.transpose();
    let g_hat = &upsilon * model.semigroup_matrix(t)? * model.control_matrix();
    let g_norm = spectral_norm(&g_hat);
    let root = SymmetricRoot::new(&m_hat);
    let (lambda, residual) = root.pinv_sqrt_with_residual(&g_hat);
    let tolerance = crate::smoothing::RANGE_RESIDUAL_TOL * g_norm;
    if g_norm > 0.0 && residual > tolerance {
        return Err(Error::RangeViolation { t, residual, tolerance });
    }
    Ok((lambda, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, ModelKind, ProjectionSpec, SpectralModel};
    use crate::smoothing::lambda_norm;

    fn heat() -> SpectralModel {
        SpectralModel::new(&ModelConfig::heat_default()).unwrap()
    }

    fn wave() -> SpectralModel {
        SpectralModel::new(&ModelConfig::wave_default()).unwrap()
    }

    fn pseudo_random(dim: usize, seed: u64) -> DVector<f64> {
        let mut lcg = seed;
        DVector::from_fn(dim, |_, _| {
            lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((lcg >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        })
    }

    #[test]
    fn weight_exponent_must_dominate_semigroup_type() {
        let model = heat();
        assert!(matches!(
            LiftDiscretization::geometric(&model, 40, 1e-6, 10.0, 0.0),
            Err(Error::BadWeight { .. })
        ));
    }

    #[test]
    fn zero_state_lifts_to_zero_trajectory() {
        let model = heat();
        let disc = LiftDiscretization::default_for(&model).unwrap();
        let ys = lift_apply(&model, &disc, &DVector::zeros(model.state_dim())).unwrap();
        assert!(ys.iter().all(|y| y.norm() == 0.0));
        assert_eq!(lift_norm_sq(&model, &disc, &DVector::zeros(model.state_dim())).unwrap(), 0.0);
    }

    #[test]
    fn lift_norm_converges_under_node_doubling() {
        // Doubled node count as the oracle: 1e-4 relative agreement.
        for model in [heat(), wave()] {
            let disc = LiftDiscretization::geometric(&model, 160, 1e-6, 20.0, 1.0).unwrap();
            let fine = disc.refined(&model).unwrap();
            for seed in [1, 2, 3] {
                let x = pseudo_random(model.state_dim(), seed);
                let coarse = lift_norm_sq(&model, &disc, &x).unwrap();
                let oracle = lift_norm_sq(&model, &fine, &x).unwrap();
                assert!(
                    (coarse - oracle).abs() / oracle < 1e-4,
                    "{:?} seed {seed}: {coarse} vs {oracle}",
                    model.kind
                );
            }
        }
    }

    #[test]
    fn lift_matrix_norm_agrees_with_direct_sum() {
        let model = wave();
        let disc = LiftDiscretization::default_for(&model).unwrap();
        let mat = lift_matrix(&model, &disc).unwrap();
        let x = pseudo_random(model.state_dim(), 9);
        let via_matrix = (&mat * &x).norm_squared();
        let direct = lift_norm_sq(&model, &disc, &x).unwrap();
        assert!((via_matrix - direct).abs() / direct < 1e-12);
    }

    #[test]
    fn heat_lift_is_finite_on_extended_space_states() {
        // x concentrated on the highest modes, normalized in the H̄ norm
        // only: the projected trajectory stays square integrable.
        let vector: Vec<f64> = (1..=64).map(|j| (j as f64).powi(-2)).collect();
        let config = ModelConfig {
            projection: ProjectionSpec::Vectors { vectors: vec![vector] },
            ..ModelConfig::heat_default()
        };
        let model = SpectralModel::new(&config).unwrap();
        let mut x = DVector::zeros(model.state_dim());
        for j in 48..64 {
            x[j] = model.eigenvalues[j].powf(model.extended_weight_exponent);
        }
        let hbar = crate::model::StateVector::new(x.clone(), crate::model::StateSpace::HBar);
        let scale = model.hbar_norm(&hbar);
        x /= scale;
        let disc = LiftDiscretization::default_for(&model).unwrap();
        let norm = lift_norm_sq(&model, &disc, &x).unwrap();
        assert!(norm.is_finite());
    }

    #[test]
    fn adjoint_identity_holds_on_random_pairs() {
        for model in [heat(), wave()] {
            let disc = LiftDiscretization::default_for(&model).unwrap();
            // z = 0 gives a zero residual exactly.
            let zero: Vec<DVector<f64>> = vec![DVector::zeros(model.dim_p); disc.len()];
            let r0 =
                lift_adjoint_check(&model, &disc, &zero, &pseudo_random(model.state_dim(), 4))
                    .unwrap();
            assert_eq!(r0, 0.0);
            for seed in 0..50u64 {
                let z: Vec<DVector<f64>> = (0..disc.len())
                    .map(|i| pseudo_random(model.dim_p, seed * 1000 + i as u64 + 1))
                    .collect();
                let x = pseudo_random(model.state_dim(), seed + 7777);
                let residual = lift_adjoint_check(&model, &disc, &z, &x).unwrap();
                assert!(residual <= 1e-10, "{:?} seed {seed}: {residual}", model.kind);
            }
        }
    }

    #[test]
    fn lifted_norm_agrees_with_unlifted_for_commuting_projections() {
        for model in [heat(), wave()] {
            let disc = LiftDiscretization::default_for(&model).unwrap();
            for &t in &[1e-3, 1e-2, 1e-1] {
                let lifted = lifted_lambda_norm(&model, &disc, t).unwrap();
                let plain = lambda_norm(&model, t).unwrap();
                let gap = (lifted - plain).abs() / plain;
                assert!(gap <= 5e-2, "{:?} t = {t}: gap {gap}", model.kind);
            }
        }
    }

    #[test]
    fn lifted_gap_halves_under_node_doubling() {
        let model = wave();
        let disc = LiftDiscretization::default_for(&model).unwrap();
        let fine = disc.refined(&model).unwrap();
        let t = 1e-2;
        let plain = lambda_norm(&model, t).unwrap();
        let gap_coarse = (lifted_lambda_norm(&model, &disc, t).unwrap() - plain).abs() / plain;
        let gap_fine = (lifted_lambda_norm(&model, &fine, t).unwrap() - plain).abs() / plain;
        assert!(
            gap_fine <= 0.5 * gap_coarse + 1e-12,
            "coarse {gap_coarse}, fine {gap_fine}"
        );
    }

    #[test]
    fn lifted_operator_reports_residual() {
        let model = heat();
        let disc = LiftDiscretization::default_for(&model).unwrap();
        let (_, residual) = lifted_lambda_operator(&model, &disc, 0.05).unwrap();
        assert!(residual.is_finite());
    }

    #[test]
    fn discretization_metadata_is_consistent() {
        let model = heat();
        let disc = LiftDiscretization::default_for(&model).unwrap();
        assert_eq!(model.kind, ModelKind::HeatBoundary);
        assert_eq!(disc.len(), 80);
        assert!(disc.time_nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(disc.quad_weights.iter().all(|&w| w > 0.0));
        // Σ w_i e^{-2ρ t_i} finite and positive.
        let mass: f64 = disc
            .time_nodes
            .iter()
            .zip(&disc.quad_weights)
            .map(|(&t, &w)| w * (-2.0 * disc.rho * t).exp())
            .sum();
        assert!(mass.is_finite() && mass > 0.0);
    }
}
