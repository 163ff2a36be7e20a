//! The Ornstein–Uhlenbeck transition semigroup on functions of the projected
//! state.
//!
//! For `φ(x) = φ̂(Px)` with a spectral (commuting) projection, the semigroup
//! reduces to an `n`-dimensional Gaussian expectation in the projected
//! coordinates `z = Px`:
//!
//! ```text
//! P_t[φ](x) = E[ φ̂(A_P(t) z + η_t) ],   η_t ~ N(0, Q̄_t),
//! ```
//!
//! and the control-direction gradient carries the Cameron–Martin weight
//!
//! ```text
//! ⟨∇ᴮ P_t[φ](x), k⟩ = E[ φ̂(·) ⟨Λ(t) k, Q̄_t^{-1/2} η_t⟩ ],
//! ```
//!
//! bounded by `‖Λ(t)‖ ‖φ̂‖_∞ |k|` — the partial-smoothing estimate itself:
//! the gradient stays finite even for discontinuous `φ̂`.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::grid::ScalarGrid;
use crate::model::SpectralModel;
use crate::quadrature::{expect, expect_weighted_multi, ProjectedGaussian, QuadScheme};

/// Gaussian law of the projected state at time `t` started from projected
/// coordinates `z`.
pub fn transition_law(model: &SpectralModel, t: f64, z: &DVector<f64>) -> Result<ProjectedGaussian> {
    let mean = model.projected_semigroup(t)? * z;
    let (_, root) = model.covariance_projected(t)?;
    Ok(ProjectedGaussian::from_mean_root(mean, &root))
}

/// `P_t[φ](x)` for a general bounded `φ̂` given as a closure on the projected
/// coordinates. `t = 0` evaluates directly (`P_0` is the identity).
pub fn ou_apply_fn(
    model: &SpectralModel,
    t: f64,
    fhat: impl Fn(&DVector<f64>) -> f64,
    z: &DVector<f64>,
    scheme: QuadScheme,
) -> Result<f64> {
    if t == 0.0 {
        return Ok(fhat(z));
    }
    let law = transition_law(model, t, z)?;
    Ok(expect(fhat, &law, scheme)?.value)
}

/// `P_t[φ](x)` for a tabulated `φ̂`.
pub fn ou_apply(
    model: &SpectralModel,
    t: f64,
    fhat: &ScalarGrid,
    z: &DVector<f64>,
    scheme: QuadScheme,
) -> Result<f64> {
    ou_apply_fn(model, t, |y| fhat.eval(y), z, scheme)
}

/// `∇ᴮ P_t[φ](x)` as an `m`-vector in the control coordinates, for a general
/// `φ̂` closure.
pub fn ou_b_gradient_fn(
    model: &SpectralModel,
    t: f64,
    fhat: impl Fn(&DVector<f64>) -> f64,
    z: &DVector<f64>,
    scheme: QuadScheme,
) -> Result<DVector<f64>> {
    let (lambda, _) = crate::smoothing::lambda_operator(model, t)?;
    let law = transition_law(model, t, z)?;
    let out = expect_weighted_multi(fhat, &law, &lambda, scheme)?;
    Ok(out.values)
}

/// `∇ᴮ P_t[φ](x)` for a tabulated `φ̂`.
pub fn ou_b_gradient(
    model: &SpectralModel,
    t: f64,
    fhat: &ScalarGrid,
    z: &DVector<f64>,
    scheme: QuadScheme,
) -> Result<DVector<f64>> {
    ou_b_gradient_fn(model, t, |y| fhat.eval(y), z, scheme)
}

/// Central finite difference of `P_t[φ]` along the control direction `B k`,
/// mapped through the projection: the independent oracle for the gradient
/// formula. Uses `P e^{tA} B k` as the mean shift in projected coordinates.
pub fn ou_b_gradient_fd(
    model: &SpectralModel,
    t: f64,
    fhat: impl Fn(&DVector<f64>) -> f64 + Copy,
    z: &DVector<f64>,
    k: &DVector<f64>,
    h: f64,
    scheme: QuadScheme,
) -> Result<f64> {
    let shift = model.projected_drifted_control(t)? * k;
    let law = transition_law(model, t, z)?;
    let plus = ProjectedGaussian {
        mean: &law.mean + &shift * h,
        directions: law.directions.clone(),
        scales: law.scales.clone(),
    };
    let minus = ProjectedGaussian {
        mean: &law.mean - &shift * h,
        directions: law.directions.clone(),
        scales: law.scales.clone(),
    };
    let up = expect(fhat, &plus, scheme)?.value;
    let down = expect(fhat, &minus, scheme)?.value;
    Ok((up - down) / (2.0 * h))
}

/// Rank comparison behind the strong-Feller diagnostic: dimension of the
/// numerical range of `Q_t^{1/2}` versus the (always full) range of `e^{tA}`.
/// A deficit means the full-gradient smoothing `Q_t^{-1/2} e^{tA}` cannot be
/// bounded — the wave model's situation.
pub fn strong_feller_rank_deficit(model: &SpectralModel, t: f64) -> Result<usize> {
    let q = model.covariance_full(t)?;
    let root = crate::linalg::SymmetricRoot::new(&q);
    Ok(model.state_dim() - root.rank())
}

/// Projected mean map `A_P(t)` exposed for tests and the solver.
pub fn projected_mean_matrix(model: &SpectralModel, t: f64) -> Result<DMatrix<f64>> {
    model.projected_semigroup(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::model::{ModelConfig, ModelKind, ProjectionSpec, SpectralModel};
    use crate::smoothing::{lambda_norm, lambda_operator};
    use approx::assert_relative_eq;

    fn heat() -> SpectralModel {
        SpectralModel::new(&ModelConfig::heat_default()).unwrap()
    }

    fn gh() -> QuadScheme {
        QuadScheme::GaussHermite { order: 20 }
    }

    #[test]
    fn constants_are_fixed_points() {
        let model = heat();
        let z = DVector::from_vec(vec![0.2]);
        let v = ou_apply_fn(&model, 0.3, |_| 1.0, &z, gh()).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn time_zero_evaluates_directly() {
        let model = heat();
        let z = DVector::from_vec(vec![0.37]);
        let v = ou_apply_fn(&model, 0.0, |y| y[0] * 2.0, &z, gh()).unwrap();
        assert_relative_eq!(v, 0.74, epsilon = 1e-14);
    }

    #[test]
    fn linear_functions_push_through_the_drift() {
        // E⟨a, A_P z + η⟩ = ⟨a, A_P(t) z⟩; Monte Carlo as the oracle.
        let model = heat();
        let t = 0.04;
        let z = DVector::from_vec(vec![0.5]);
        let a = 1.7;
        let exact = a * (projected_mean_matrix(&model, t).unwrap() * &z)[0];
        let v = ou_apply_fn(&model, t, |y| a * y[0], &z, gh()).unwrap();
        assert_relative_eq!(v, exact, max_relative = 1e-12);
        let mc = ou_apply_fn(
            &model,
            t,
            |y| a * y[0],
            &z,
            QuadScheme::MonteCarlo { samples: 400_000, seed: 5 },
        )
        .unwrap();
        assert!((mc - exact).abs() < 3.0 * a * 0.25 / (400_000f64).sqrt() + 1e-6);
    }

    #[test]
    fn sup_norm_contraction_over_a_grid() {
        let model = heat();
        let spec = GridSpec::symmetric(&[1.0], 21).unwrap();
        let fhat = crate::grid::ScalarGrid::from_fn(spec.clone(), |y| (4.0 * y[0]).sin()).unwrap();
        let sup = fhat.sup_norm();
        for flat in 0..spec.total_nodes() {
            let z = spec.node_coords(flat);
            let v = ou_apply(&model, 0.05, &fhat, &z, gh()).unwrap();
            assert!(v.abs() <= sup + 1e-12);
        }
    }

    #[test]
    fn gradient_of_a_constant_vanishes() {
        let model = heat();
        let z = DVector::from_vec(vec![-0.1]);
        let grad = ou_b_gradient_fn(&model, 0.1, |_| 3.5, &z, gh()).unwrap();
        assert!(grad.norm() < 1e-12);
    }

    #[test]
    fn gradient_of_linear_functions_is_the_drifted_control_row() {
        // φ̂(y) = ⟨a, y⟩ gives ∇ᴮ P_t[φ](x) k = ⟨a, P e^{tA} B k⟩.
        let model = heat();
        let t = 0.03;
        let z = DVector::from_vec(vec![0.4]);
        let a = -0.9;
        let grad = ou_b_gradient_fn(&model, t, |y| a * y[0], &z, gh()).unwrap();
        let bt = model.projected_drifted_control(t).unwrap();
        for l in 0..model.dim_k {
            assert_relative_eq!(grad[l], a * bt[(0, l)], max_relative = 1e-10);
        }
    }

    #[test]
    fn gradient_matches_central_differences_for_smooth_functions() {
        let model = heat();
        let t = 0.05;
        let z = DVector::from_vec(vec![0.2]);
        let fhat = |y: &DVector<f64>| (1.3 * y[0]).sin() + 0.5 * (0.7 * y[0]).cos();
        let grad = ou_b_gradient_fn(&model, t, fhat, &z, gh()).unwrap();
        for l in 0..model.dim_k {
            let mut k = DVector::zeros(model.dim_k);
            k[l] = 1.0;
            let fd = ou_b_gradient_fd(&model, t, fhat, &z, &k, 1e-4, gh()).unwrap();
            assert_relative_eq!(grad[l], fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn gradient_is_bounded_for_discontinuous_functions() {
        // Step function: the partial-smoothing claim itself — the gradient
        // stays below ‖Λ(t)‖ ‖φ‖_∞ |k|.
        let model = heat();
        let z = DVector::from_vec(vec![0.0]);
        let step = |y: &DVector<f64>| if y[0] >= 0.05 { 1.0 } else { -1.0 };
        for &t in &[1e-4, 1e-3, 1e-2, 1e-1] {
            let grad = ou_b_gradient_fn(&model, t, step, &z, gh()).unwrap();
            let bound = lambda_norm(&model, t).unwrap();
            for l in 0..model.dim_k {
                assert!(grad[l].abs() <= bound + 1e-10, "t = {t}");
            }
            assert!(grad.iter().all(|g| g.is_finite()));
        }
    }

    #[test]
    fn gradient_bound_is_approached_by_aligned_sign_functions() {
        // φ̂ = sign of the top singular direction of Λ(t) pushes the weighted
        // expectation toward its extremal value E|N(0,1)| = √(2/π) ‖Λ‖.
        let model = heat();
        let t = 0.02;
        let (lambda, _) = lambda_operator(&model, t).unwrap();
        let (_, root) = model.covariance_projected(t).unwrap();
        let law_dir = root.vectors.column(0).clone_owned();
        let z = DVector::from_vec(vec![0.0]);
        let mean = (projected_mean_matrix(&model, t).unwrap() * &z)[0];
        let sign = move |y: &DVector<f64>| if (y[0] - mean) * law_dir[0] >= 0.0 { 1.0 } else { -1.0 };
        let grad = ou_b_gradient_fn(&model, t, sign, &z, QuadScheme::GaussHermite { order: 64 }).unwrap();
        let k = DVector::from_fn(model.dim_k, |l, _| lambda[(0, l)]).normalize();
        let along: f64 = grad.dot(&k);
        let bound = lambda_norm(&model, t).unwrap();
        let expected = (2.0 / std::f64::consts::PI).sqrt() * bound;
        // Within 20%: Gauss–Hermite converges slowly on the sign function.
        assert!((along.abs() - expected).abs() / expected < 0.2);
    }

    #[test]
    fn chapman_kolmogorov_for_smooth_functions() {
        // P_{t+s} = P_t ∘ P_s evaluated through nested closures; combined
        // quadrature error stays under 1e-6 for analytic φ̂.
        let model = heat();
        let (t, s) = (0.05, 0.08);
        let z = DVector::from_vec(vec![0.3]);
        let fhat = |y: &DVector<f64>| (0.8 * y[0]).sin();
        let direct = ou_apply_fn(&model, t + s, fhat, &z, gh()).unwrap();
        let nested = ou_apply_fn(
            &model,
            t,
            |y: &DVector<f64>| ou_apply_fn(&model, s, fhat, y, gh()).unwrap(),
            &z,
            gh(),
        )
        .unwrap();
        assert!((direct - nested).abs() < 1e-6, "{direct} vs {nested}");
    }

    #[test]
    fn strong_feller_holds_for_heat_but_not_underdriven_wave() {
        let heat = heat();
        assert_eq!(strong_feller_rank_deficit(&heat, 0.05).unwrap(), 0);
        // Wave with noise on only two of four modes: Q_t^{1/2} cannot reach
        // the whole space while e^{tA} does.
        let config = ModelConfig {
            kind: ModelKind::WaveDistributed,
            dim_h: 4,
            dim_k: 2,
            projection: ProjectionSpec::Modes { count: 2 },
            ..ModelConfig::wave_default()
        };
        let wave = SpectralModel::new(&config).unwrap();
        assert_eq!(strong_feller_rank_deficit(&wave, 0.05).unwrap(), 4);
    }
}
