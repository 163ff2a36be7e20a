//! Feedback synthesis and empirical verification.
//!
//! The feedback map applies the Lipschitz argmin selection of the Hamiltonian
//! to the solved gradient field: `u = γ(ŵ(Px))`. Closed-loop trajectories are
//! simulated with an exponential-Euler scheme — the semigroup step is exact
//! per mode, the within-step control convolution `∫ e^{sA} B u ds` is in
//! closed form (finite even for the unbounded heat control operator), and the
//! noise increment carries the exact one-step covariance. The heat truncation
//! is stiff (`λ_64 ≈ 4·10⁴`), so exact mode decay removes any stability
//! constraint on `dt`.
//!
//! Costs are accumulated with the running cost frozen at the left endpoint of
//! each step and the discount factor integrated exactly across the step, so
//! deterministic constant-cost cases match their closed forms to rounding.
//!
//! The fundamental identity
//! `J(x;u) − v(x) = E ∫ e^{-λs} [H_CV(ŵ(X); u) − H_min(ŵ(X))] ds ≥ 0`
//! is estimated two ways from the same paths — as a cost difference and as
//! the integrand integral — giving the verification-theorem checks their
//! teeth: the feedback policy's gap is statistically zero, every other
//! policy's gap is positive.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hjb::{h_min, ControlCost, ControlSet, HamiltonianSpec, ValueSolution};
use crate::linalg::SymmetricRoot;
use crate::model::{ModelKind, SpectralModel, StateVector};
use crate::seed::derive_seed;

/// Control policy under evaluation.
#[derive(Debug, Clone)]
pub enum Policy<'a> {
    /// Optimal feedback from a solved value function.
    Feedback(&'a ValueSolution),
    /// Constant control.
    Constant(DVector<f64>),
    /// Piecewise-constant deterministic schedule `(start_time, control)`,
    /// sorted by start time.
    OpenLoop(Vec<(f64, DVector<f64>)>),
}

/// Simulation parameters. `horizon` should cover the discounted tail
/// (`≈ 40/λ`); the truncation is budgeted explicitly either way.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationParams {
    pub lambda: f64,
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Record the first `record_paths` trajectories (projected state and
    /// control per step).
    pub record_paths: usize,
}

impl SimulationParams {
    pub fn new(lambda: f64, dt: f64, horizon: f64, n_paths: usize, seed: u64) -> Self {
        SimulationParams { lambda, dt, horizon, n_paths, seed, record_paths: 0 }
    }

    /// Defaults: `dt = 1e-3`, `horizon = 40/λ`, 2000 paths.
    pub fn default_for(lambda: f64, seed: u64) -> Self {
        Self::new(lambda, 1e-3, 40.0 / lambda, 2000, seed)
    }
}

/// One recorded trajectory: `(time, projected state, control)` per step.
pub type Trajectory = Vec<(f64, Vec<f64>, Vec<f64>)>;

/// Monte Carlo cost estimate with its provenance.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationResult {
    pub cost_estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    /// Discounted-tail truncation bound `e^{-λ·horizon} (sup ℓ₀ + sup ℓ₁)/λ`.
    pub error_budget: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_trajectories: Option<Vec<Trajectory>>,
}

/// Two estimators of the fundamental-identity gap `J(x;u) − v(x)`.
#[derive(Debug, Clone, Serialize)]
pub struct FundamentalIdentityReport {
    /// `J_est − v̂(Px)` and the standard error of `J_est`.
    pub gap_cost: f64,
    pub gap_cost_std_error: f64,
    /// Direct estimate of `E ∫ e^{-λs}[H_CV − H_min] ds` and its standard
    /// error.
    pub gap_integrand: f64,
    pub gap_integrand_std_error: f64,
    pub value_at_start: f64,
    pub cost_estimate: f64,
}

/// The feedback map `Ψ(x) = γ(ŵ(Px))`; always lands in `U`.
pub fn feedback(
    model: &SpectralModel,
    spec: &HamiltonianSpec,
    sol: &ValueSolution,
    x: &StateVector,
) -> Result<DVector<f64>> {
    let z = model.projection_apply(x)?;
    let p = sol.w.eval(&z);
    Ok(h_min(&p, spec).1)
}

/// Largest value of `ℓ₁` over the admissible set (tail budgets).
fn sup_control_cost(set: &ControlSet, cost: &ControlCost) -> f64 {
    let r = set.sup_norm();
    match cost {
        ControlCost::Quadratic { eta } => 0.5 * eta * r * r,
        ControlCost::Linear { coef } => coef * r,
        ControlCost::Custom { values, .. } => {
            values.iter().cloned().fold(0.0_f64, |a, v| a.max(v.abs()))
        }
    }
}

/// One-step noise in principal coordinates. The heat step covariance is
/// diagonal, so the draw maps straight onto the coordinates; the wave keeps
/// dense principal columns.
enum StepNoise {
    Diagonal(Vec<(usize, f64)>),
    Dense(Vec<DVector<f64>>),
}

/// Exponential-Euler stepper with precomputed per-step operators.
struct Stepper {
    kind: ModelKind,
    /// Heat: per-mode decay factors. Wave: per-mode (cos, sin) pairs.
    decay: Vec<f64>,
    rot: Vec<(f64, f64)>,
    /// `∫_0^{dt} e^{sA} B ds` (state × m).
    ctrl_map: DMatrix<f64>,
    noise: StepNoise,
    noise_rank: usize,
}

impl Stepper {
    fn new(model: &SpectralModel, dt: f64) -> Result<Self> {
        let b = model.control_matrix();
        let (decay, rot, ctrl_map) = match model.kind {
            ModelKind::HeatBoundary => {
                let decay: Vec<f64> =
                    model.eigenvalues.iter().map(|&l| (-l * dt).exp()).collect();
                let mut ctrl = b.clone();
                for j in 0..model.dim_h {
                    let l = model.eigenvalues[j];
                    let gain = (-(-l * dt).exp_m1()) / l;
                    ctrl.row_mut(j).scale_mut(gain);
                }
                (decay, Vec::new(), ctrl)
            }
            ModelKind::WaveDistributed => {
                let c = model.wave_speed;
                let rot: Vec<(f64, f64)> = (0..model.dim_h)
                    .map(|j| {
                        let wt = c * (j + 1) as f64 * std::f64::consts::PI * dt;
                        (wt.cos(), wt.sin())
                    })
                    .collect();
                let mut ctrl = DMatrix::zeros(model.state_dim(), model.dim_k);
                for l in 0..model.dim_k {
                    let w = c * (l + 1) as f64 * std::f64::consts::PI;
                    let half = 0.5 * w * dt;
                    ctrl[(2 * l, l)] = 2.0 * half.sin() * half.sin() / w; // (1-cos)/w
                    ctrl[(2 * l + 1, l)] = (w * dt).sin() / w;
                }
                (Vec::new(), rot, ctrl)
            }
        };
        let step_cov = model.covariance_full(dt)?;
        let noise = match model.kind {
            ModelKind::HeatBoundary => {
                // Diagonal covariance: std per coordinate, skipping dead modes.
                let stds: Vec<(usize, f64)> = (0..model.state_dim())
                    .filter(|&j| step_cov[(j, j)] > 0.0)
                    .map(|j| (j, step_cov[(j, j)].sqrt()))
                    .collect();
                StepNoise::Diagonal(stds)
            }
            ModelKind::WaveDistributed => {
                let root = SymmetricRoot::new(&step_cov);
                let cols: Vec<DVector<f64>> = (0..root.rank())
                    .map(|i| root.vectors.column(i) * root.eigenvalues[i].sqrt())
                    .collect();
                StepNoise::Dense(cols)
            }
        };
        let noise_rank = match &noise {
            StepNoise::Diagonal(stds) => stds.len(),
            StepNoise::Dense(cols) => cols.len(),
        };
        Ok(Stepper { kind: model.kind, decay, rot, ctrl_map, noise, noise_rank })
    }

    fn noise_rank(&self) -> usize {
        self.noise_rank
    }

    /// `x ← e^{dtA} x + ∫e^{sA}B ds · u + N(0, Q_dt)` with the supplied
    /// standardized draws.
    fn step(&self, x: &mut DVector<f64>, u: &DVector<f64>, xi: &[f64]) {
        match self.kind {
            ModelKind::HeatBoundary => {
                for (v, &d) in x.iter_mut().zip(&self.decay) {
                    *v *= d;
                }
            }
            ModelKind::WaveDistributed => {
                for (j, &(c, s)) in self.rot.iter().enumerate() {
                    let p = x[2 * j];
                    let q = x[2 * j + 1];
                    x[2 * j] = c * p + s * q;
                    x[2 * j + 1] = -s * p + c * q;
                }
            }
        }
        x.gemv(1.0, &self.ctrl_map, u, 1.0);
        match &self.noise {
            StepNoise::Diagonal(stds) => {
                for (&z, &(j, std)) in xi.iter().zip(stds) {
                    x[j] += std * z;
                }
            }
            StepNoise::Dense(cols) => {
                for (&z, col) in xi.iter().zip(cols) {
                    x.axpy(z, col, 1.0);
                }
            }
        }
    }
}

/// Balanced pairwise summation (deterministic reduction order).
fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

struct PathOutput {
    cost: f64,
    hamiltonian_gap: f64,
    trajectory: Option<Trajectory>,
}

/// Discounted-cost Monte Carlo for a policy. Noise streams depend only on
/// `(seed, path index)`, so runs with equal seeds share increments bit-exactly
/// across policies (paired comparisons).
pub fn evaluate_cost(
    model: &SpectralModel,
    spec: &HamiltonianSpec,
    policy: &Policy,
    x0: &StateVector,
    params: &SimulationParams,
) -> Result<SimulationResult> {
    let (result, _) = evaluate_cost_with_gap(model, spec, policy, None, x0, params)?;
    Ok(result)
}

/// Closed-loop simulation under the optimal feedback.
pub fn simulate_closed_loop(
    model: &SpectralModel,
    spec: &HamiltonianSpec,
    sol: &ValueSolution,
    x0: &StateVector,
    params: &SimulationParams,
) -> Result<SimulationResult> {
    evaluate_cost(model, spec, &Policy::Feedback(sol), x0, params)
}

/// Shared engine: cost estimate, optionally with the Hamiltonian-gap
/// accumulator fed by a solved gradient field.
fn evaluate_cost_with_gap(
    model: &SpectralModel,
    spec: &HamiltonianSpec,
    policy: &Policy,
    gap_field: Option<&ValueSolution>,
    x0: &StateVector,
    params: &SimulationParams,
) -> Result<(SimulationResult, (f64, f64))> {
    model.check_state_dim(x0.coeffs.len())?;
    if params.dt <= 0.0 || params.horizon <= 0.0 || params.n_paths == 0 {
        return Err(Error::InvalidConfig("dt, horizon and n_paths must be positive".into()));
    }
    if let Policy::Constant(u) = policy {
        if !spec.control_set.contains(u) {
            return Err(Error::ControlOutOfSet(format!("constant policy |u| = {:.6}", u.norm())));
        }
    }
    if let Policy::OpenLoop(table) = policy {
        if table.is_empty() {
            return Err(Error::InvalidConfig("open-loop table is empty".into()));
        }
        for (_, u) in table {
            if !spec.control_set.contains(u) {
                return Err(Error::ControlOutOfSet("open-loop entry outside U".into()));
            }
        }
    }

    let stepper = Stepper::new(model, params.dt)?;
    let n_steps = (params.horizon / params.dt).round() as usize;
    // Exact discount integral over each step: (e^{-λ t_i} - e^{-λ t_{i+1}})/λ.
    let discount_weights: Vec<f64> = (0..n_steps)
        .map(|i| {
            let a = params.lambda * params.dt * i as f64;
            let b = params.lambda * params.dt * (i + 1) as f64;
            ((-a).exp() - (-b).exp()) / params.lambda
        })
        .collect();

    let outputs: Vec<PathOutput> = (0..params.n_paths)
        .into_par_iter()
        .map(|path| {
            run_path_with_gap(
                model,
                spec,
                policy,
                gap_field,
                &x0.coeffs,
                params,
                &stepper,
                &discount_weights,
                path,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let costs: Vec<f64> = outputs.iter().map(|o| o.cost).collect();
    let gaps: Vec<f64> = outputs.iter().map(|o| o.hamiltonian_gap).collect();
    let mean = pairwise_sum(&costs) / params.n_paths as f64;
    let var = pairwise_sum(&costs.iter().map(|c| (c - mean) * (c - mean)).collect::<Vec<_>>())
        / params.n_paths as f64;
    let std_error = (var / params.n_paths as f64).sqrt();
    let gap_mean = pairwise_sum(&gaps) / params.n_paths as f64;
    let gap_var = pairwise_sum(&gaps.iter().map(|g| (g - gap_mean) * (g - gap_mean)).collect::<Vec<_>>())
        / params.n_paths as f64;
    let gap_se = (gap_var / params.n_paths as f64).sqrt();

    let sup_l1 = sup_control_cost(&spec.control_set, &spec.control_cost);
    let error_budget = (-params.lambda * params.horizon).exp()
        * (spec.state_cost.sup_norm() + sup_l1)
        / params.lambda;

    let sample_trajectories = if params.record_paths > 0 {
        Some(outputs.into_iter().filter_map(|o| o.trajectory).collect())
    } else {
        None
    };

    Ok((
        SimulationResult {
            cost_estimate: mean,
            std_error,
            n_paths: params.n_paths,
            horizon: params.horizon,
            dt: params.dt,
            seed: params.seed,
            error_budget,
            sample_trajectories,
        },
        (gap_mean, gap_se),
    ))
}

#[allow(clippy::too_many_arguments)]
fn run_path_with_gap(
    model: &SpectralModel,
    spec: &HamiltonianSpec,
    policy: &Policy,
    gap_field: Option<&ValueSolution>,
    x0: &DVector<f64>,
    params: &SimulationParams,
    stepper: &Stepper,
    discount_weights: &[f64],
    path_index: usize,
) -> Result<PathOutput> {
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(params.seed, &[path_index as u64]));
    let mut x = x0.clone();
    let mut xi = vec![0.0; stepper.noise_rank()];
    let v_basis = model.projection_basis();
    let record = path_index < params.record_paths;
    let mut trajectory = record.then(Vec::new);
    let mut open_loop_pos = 0usize;

    let mut cost = 0.0;
    let mut hamiltonian_gap = 0.0;
    for (i, &wdisc) in discount_weights.iter().enumerate() {
        let t = i as f64 * params.dt;
        let z = v_basis.transpose() * &x;
        let u = match policy {
            Policy::Feedback(sol) => h_min(&sol.w.eval(&z), spec).1,
            Policy::Constant(u) => u.clone(),
            Policy::OpenLoop(table) => {
                while open_loop_pos + 1 < table.len() && table[open_loop_pos + 1].0 <= t {
                    open_loop_pos += 1;
                }
                table[open_loop_pos].1.clone()
            }
        };

        cost += wdisc * (spec.state_cost.eval(&z) + spec.control_cost.eval(&u));

        if let Some(sol) = gap_field {
            let p = sol.w.eval(&z);
            let (hmin, _) = h_min(&p, spec);
            let hcv = p.dot(&u) + spec.control_cost.eval(&u);
            hamiltonian_gap += wdisc * (hcv - hmin);
        }

        if let Some(traj) = trajectory.as_mut() {
            traj.push((t, z.iter().cloned().collect(), u.iter().cloned().collect()));
        }

        for slot in xi.iter_mut() {
            *slot = StandardNormal.sample(&mut rng);
        }
        stepper.step(&mut x, &u, &xi);
        let magnitude = x.amax();
        if magnitude > 1e8 {
            return Err(Error::UnstableStep { t, magnitude });
        }
    }
    Ok(PathOutput { cost, hamiltonian_gap, trajectory })
}

/// Estimates the fundamental-identity gap `J(x;u) − v(x)` both as a cost
/// difference and as the direct integrand integral, from the same paths.
pub fn fundamental_identity_check(
    model: &SpectralModel,
    spec: &HamiltonianSpec,
    sol: &ValueSolution,
    policy: &Policy,
    x0: &StateVector,
    params: &SimulationParams,
) -> Result<FundamentalIdentityReport> {
    let (result, (gap_integrand, gap_integrand_se)) =
        evaluate_cost_with_gap(model, spec, policy, Some(sol), x0, params)?;
    let z0 = model.projection_apply(x0)?;
    let value_at_start = sol.v.eval(&z0);
    Ok(FundamentalIdentityReport {
        gap_cost: result.cost_estimate - value_at_start,
        gap_cost_std_error: result.std_error,
        gap_integrand,
        gap_integrand_std_error: gap_integrand_se,
        value_at_start,
        cost_estimate: result.cost_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, ScalarGrid, VectorGrid};
    use crate::model::{ModelConfig, SpectralModel, StateSpace};
    use approx::assert_relative_eq;

    fn heat_with_noise(noise_scale: f64) -> SpectralModel {
        let config = ModelConfig { dim_h: 16, noise_scale, ..ModelConfig::heat_default() };
        SpectralModel::new(&config).unwrap()
    }

    fn spec_with_cost(model: &SpectralModel, c: f64) -> HamiltonianSpec {
        let half = vec![1.0; model.dim_p];
        let grid = GridSpec::symmetric(&half, 9).unwrap();
        HamiltonianSpec::new(
            ControlSet::Ball { radius: 0.5 },
            ControlCost::Quadratic { eta: 1.0 },
            ScalarGrid::constant(grid, c).unwrap(),
        )
        .unwrap()
    }

    fn dummy_solution(model: &SpectralModel, spec: &HamiltonianSpec, w_value: f64) -> ValueSolution {
        let grid = spec.state_cost.spec.clone();
        ValueSolution {
            v: ScalarGrid::constant(grid.clone(), 0.0).unwrap(),
            w: VectorGrid::new(
                grid.clone(),
                model.dim_k,
                vec![w_value; grid.total_nodes() * model.dim_k],
            )
            .unwrap(),
            lambda: 5.0,
            residual_history: vec![],
            contraction_bound: 0.5,
            iterations: 0,
            converged: true,
            tol: 1e-6,
            consistency_gap: 0.0,
            grid_fd_gap: 0.0,
            error_budget_value: 0.0,
            error_budget_gradient: 0.0,
            below_threshold: false,
        }
    }

    #[test]
    fn feedback_at_zero_gradient_is_zero() {
        let model = heat_with_noise(1.0);
        let spec = spec_with_cost(&model, 0.0);
        let sol = dummy_solution(&model, &spec, 0.0);
        let x = StateVector::zeros(model.state_dim());
        let u = feedback(&model, &spec, &sol, &x).unwrap();
        assert_eq!(u.norm(), 0.0);
    }

    #[test]
    fn feedback_saturates_on_the_ball_boundary() {
        let model = heat_with_noise(1.0);
        let spec = spec_with_cost(&model, 0.0);
        let sol = dummy_solution(&model, &spec, 40.0);
        let x = StateVector::zeros(model.state_dim());
        let u = feedback(&model, &spec, &sol, &x).unwrap();
        assert_relative_eq!(u.norm(), 0.5, epsilon = 1e-12);
        assert!(spec.control_set.contains(&u));
    }

    #[test]
    fn feedback_selection_is_lipschitz_in_the_gradient() {
        let model = heat_with_noise(1.0);
        let spec = spec_with_cost(&model, 0.0);
        let eta = 1.0;
        let mut lcg = 5u64;
        let mut rand = || {
            lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((lcg >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for _ in 0..100 {
            let p = DVector::from_vec(vec![2.0 * rand(), 2.0 * rand()]);
            let q = DVector::from_vec(vec![2.0 * rand(), 2.0 * rand()]);
            let up = h_min(&p, &spec).1;
            let uq = h_min(&q, &spec).1;
            assert!((up - uq).norm() <= (1.0 / eta) * (&p - &q).norm() + 1e-12);
        }
    }

    #[test]
    fn zero_problem_costs_nothing() {
        let model = heat_with_noise(0.0);
        let spec = spec_with_cost(&model, 0.0);
        let params = SimulationParams::new(5.0, 1e-3, 2.0, 4, 7);
        let x0 = StateVector::zeros(model.state_dim());
        let result =
            evaluate_cost(&model, &spec, &Policy::Constant(DVector::zeros(2)), &x0, &params)
                .unwrap();
        assert_eq!(result.cost_estimate, 0.0);
        assert_eq!(result.std_error, 0.0);
    }

    #[test]
    fn deterministic_constant_cost_matches_closed_form() {
        // No noise, zero control, ℓ0 ≡ c: J = c (1 - e^{-λ h})/λ exactly.
        let model = heat_with_noise(0.0);
        let c = 1.7;
        let spec = spec_with_cost(&model, c);
        let lambda = 5.0;
        let horizon = 3.0;
        let params = SimulationParams::new(lambda, 1e-3, horizon, 2, 99);
        let x0 = StateVector::zeros(model.state_dim());
        let result =
            evaluate_cost(&model, &spec, &Policy::Constant(DVector::zeros(2)), &x0, &params)
                .unwrap();
        let closed = c * (1.0 - (-lambda * horizon).exp()) / lambda;
        assert_relative_eq!(result.cost_estimate, closed, max_relative = 1e-6);
    }

    #[test]
    fn identical_seeds_give_bit_identical_results() {
        let model = heat_with_noise(1.0);
        let spec = spec_with_cost(&model, 1.0);
        let params = SimulationParams::new(5.0, 1e-3, 1.0, 16, 4242);
        let x0 = StateVector::zeros(model.state_dim());
        let u = DVector::from_vec(vec![0.2, -0.1]);
        let a = evaluate_cost(&model, &spec, &Policy::Constant(u.clone()), &x0, &params).unwrap();
        let b = evaluate_cost(&model, &spec, &Policy::Constant(u), &x0, &params).unwrap();
        assert_eq!(a.cost_estimate.to_bits(), b.cost_estimate.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn halving_dt_moves_the_estimate_within_noise() {
        let model = heat_with_noise(1.0);
        let spec = spec_with_cost(&model, 1.0);
        let x0 = StateVector::zeros(model.state_dim());
        let coarse = SimulationParams::new(5.0, 2e-3, 2.0, 400, 11);
        let fine = SimulationParams::new(5.0, 1e-3, 2.0, 400, 11);
        let a = evaluate_cost(&model, &spec, &Policy::Constant(DVector::zeros(2)), &x0, &coarse)
            .unwrap();
        let b = evaluate_cost(&model, &spec, &Policy::Constant(DVector::zeros(2)), &x0, &fine)
            .unwrap();
        assert!(
            (a.cost_estimate - b.cost_estimate).abs()
                <= 2.0 * a.std_error.max(b.std_error) + 1e-4
        );
    }

    #[test]
    fn horizon_budget_covers_the_truncated_tail() {
        let model = heat_with_noise(1.0);
        let spec = spec_with_cost(&model, 1.0);
        let x0 = StateVector::zeros(model.state_dim());
        let short = SimulationParams::new(5.0, 1e-3, 1.5, 300, 3);
        let long = SimulationParams::new(5.0, 1e-3, 3.0, 300, 3);
        let a = evaluate_cost(&model, &spec, &Policy::Constant(DVector::zeros(2)), &x0, &short)
            .unwrap();
        let b = evaluate_cost(&model, &spec, &Policy::Constant(DVector::zeros(2)), &x0, &long)
            .unwrap();
        assert!(a.error_budget >= (a.cost_estimate - b.cost_estimate).abs() - 2.0 * a.std_error);
    }

    #[test]
    fn open_loop_schedule_switches_controls() {
        let model = heat_with_noise(0.0);
        let spec = spec_with_cost(&model, 0.0);
        let lambda = 5.0;
        let params = SimulationParams::new(lambda, 1e-3, 1.0, 1, 0);
        let x0 = StateVector::zeros(model.state_dim());
        // ℓ1 = |u|²/2 only; switch from u=0 to |u| = 0.4 at t = 0.5.
        let table = vec![
            (0.0, DVector::zeros(2)),
            (0.5, DVector::from_vec(vec![0.4, 0.0])),
        ];
        let result =
            evaluate_cost(&model, &spec, &Policy::OpenLoop(table), &x0, &params).unwrap();
        let expected = 0.5 * 0.16 * ((-lambda * 0.5).exp() - (-lambda * 1.0).exp()) / lambda;
        assert_relative_eq!(result.cost_estimate, expected, max_relative = 1e-9);
    }

    #[test]
    fn inadmissible_policies_are_rejected() {
        let model = heat_with_noise(1.0);
        let spec = spec_with_cost(&model, 0.0);
        let params = SimulationParams::new(5.0, 1e-3, 1.0, 2, 0);
        let x0 = StateVector::zeros(model.state_dim());
        let err = evaluate_cost(
            &model,
            &spec,
            &Policy::Constant(DVector::from_vec(vec![5.0, 0.0])),
            &x0,
            &params,
        );
        assert!(matches!(err, Err(Error::ControlOutOfSet(_))));
    }

    #[test]
    fn recorded_trajectories_have_the_requested_shape() {
        let model = heat_with_noise(1.0);
        let spec = spec_with_cost(&model, 1.0);
        let mut params = SimulationParams::new(5.0, 1e-2, 0.1, 3, 21);
        params.record_paths = 2;
        let x0 = StateVector::zeros(model.state_dim());
        let result =
            evaluate_cost(&model, &spec, &Policy::Constant(DVector::zeros(2)), &x0, &params)
                .unwrap();
        let trajectories = result.sample_trajectories.unwrap();
        assert_eq!(trajectories.len(), 2);
        assert_eq!(trajectories[0].len(), 10);
        let (t, z, u) = &trajectories[0][0];
        assert_eq!(*t, 0.0);
        assert_eq!(z.len(), model.dim_p);
        assert_eq!(u.len(), model.dim_k);
    }

    #[test]
    fn pairwise_sum_matches_sequential_sum() {
        let xs: Vec<f64> = (0..1001).map(|i| (i as f64 * 0.37).sin()).collect();
        let seq: f64 = xs.iter().sum();
        assert_relative_eq!(pairwise_sum(&xs), seq, max_relative = 1e-12);
    }
}
