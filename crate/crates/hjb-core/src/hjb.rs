//! Hamiltonians, the contraction certificate, and the fixed-point solve of
//! the stationary HJB equation in mild form.
//!
//! The equation is solved through the nonlinear operator `F = (F₁, F₂)`
//!
//! ```text
//! F₁[w](z) = ∫_0^∞ e^{-λt} P_t[ℓ₀ + H_min(w)](z) dt
//! F₂[w](z) = ∫_0^∞ e^{-λt} ∇ᴮ P_t[ℓ₀ + H_min(w)](z) dt
//! ```
//!
//! which contracts in the sup norm once the discount factor `λ` dominates the
//! smoothing singularity: the Lipschitz factor is
//! `L_H · κ₀ ∫_0^∞ e^{-λt}(t^{-γ} ∨ 1) dt`, evaluated in closed form through
//! the lower incomplete gamma function. Picard iteration from zero then
//! converges geometrically to the fixed point `(v̂, ŵ)` with `ŵ = ∇ᴮ v̂`.
//!
//! The time integral uses product integration: the integrand factor
//! `P_t[...]` is interpolated linearly between graded nodes while `e^{-λt}`
//! is integrated exactly, so constants are reproduced to rounding
//! (`ℓ₀ ≡ 1, w ≡ 0` gives `F₁ ≡ 1/λ` exactly). Head and tail contributions
//! are frozen at the first/last node value and separately budgeted.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma_li;

use crate::error::{Error, Result};
use crate::grid::{ScalarGrid, VectorGrid};
use crate::model::SpectralModel;
use crate::quadrature::{expect_weighted_multi, ProjectedGaussian, QuadScheme};
use crate::smoothing::EstimateReport;

/// Admissible control set `U`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlSet {
    Ball { radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl ControlSet {
    pub fn contains(&self, u: &DVector<f64>) -> bool {
        match self {
            ControlSet::Ball { radius } => u.norm() <= radius * (1.0 + 1e-12) + 1e-12,
            ControlSet::Box { lower, upper } => {
                u.len() == lower.len()
                    && u.iter().zip(lower.iter().zip(upper)).all(|(&x, (&lo, &hi))| {
                        x >= lo - 1e-12 && x <= hi + 1e-12
                    })
            }
        }
    }

    /// `sup_{u ∈ U} |u|` — the Lipschitz constant of `H_min`.
    pub fn sup_norm(&self) -> f64 {
        match self {
            ControlSet::Ball { radius } => *radius,
            ControlSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(&lo, &hi)| lo.abs().max(hi.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    pub fn validate(&self, dim_k: usize) -> Result<()> {
        match self {
            ControlSet::Ball { radius } => {
                if *radius <= 0.0 {
                    return Err(Error::InvalidConfig("ball radius must be positive".into()));
                }
            }
            ControlSet::Box { lower, upper } => {
                if lower.len() != dim_k || upper.len() != dim_k {
                    return Err(Error::DimensionMismatch { expected: dim_k, got: lower.len() });
                }
                if lower.iter().zip(upper).any(|(lo, hi)| !(lo < hi)) {
                    return Err(Error::InvalidConfig("degenerate box".into()));
                }
            }
        }
        Ok(())
    }
}

/// Control running cost `ℓ₁`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlCost {
    /// `(η/2) |u|²`, `η > 0`.
    Quadratic { eta: f64 },
    /// `c |u|`.
    Linear { coef: f64 },
    /// Tabulated on explicit control points; minimization is brute force over
    /// the table.
    Custom { nodes: Vec<Vec<f64>>, values: Vec<f64> },
}

impl ControlCost {
    pub fn eval(&self, u: &DVector<f64>) -> f64 {
        match self {
            ControlCost::Quadratic { eta } => 0.5 * eta * u.norm_squared(),
            ControlCost::Linear { coef } => coef * u.norm(),
            ControlCost::Custom { nodes, values } => {
                // Nearest tabulated point.
                let mut best = f64::MAX;
                let mut best_v = 0.0;
                for (node, &v) in nodes.iter().zip(values) {
                    let d: f64 =
                        node.iter().zip(u.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                    if d < best {
                        best = d;
                        best_v = v;
                    }
                }
                best_v
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ControlCost::Quadratic { eta } if *eta <= 0.0 => {
                Err(Error::InvalidConfig("quadratic control cost needs eta > 0".into()))
            }
            ControlCost::Linear { coef } if *coef < 0.0 => {
                Err(Error::InvalidConfig("linear control cost needs coef >= 0".into()))
            }
            ControlCost::Custom { nodes, values } if nodes.is_empty() || nodes.len() != values.len() => {
                Err(Error::InvalidConfig("custom control cost table is inconsistent".into()))
            }
            _ => Ok(()),
        }
    }
}

/// The Hamiltonian data: control set, control cost and the tabulated state
/// cost `ℓ̄₀` on the projected coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct HamiltonianSpec {
    pub control_set: ControlSet,
    pub control_cost: ControlCost,
    pub state_cost: ScalarGrid,
}

impl HamiltonianSpec {
    pub fn new(control_set: ControlSet, control_cost: ControlCost, state_cost: ScalarGrid) -> Result<Self> {
        control_cost.validate()?;
        Ok(HamiltonianSpec { control_set, control_cost, state_cost })
    }
}

/// Current-value Hamiltonian `H_CV(p; u) = ⟨p, u⟩ + ℓ₁(u)`.
pub fn h_cv(p: &DVector<f64>, u: &DVector<f64>, spec: &HamiltonianSpec) -> Result<f64> {
    if !spec.control_set.contains(u) {
        return Err(Error::ControlOutOfSet(format!("|u| = {:.6}", u.norm())));
    }
    Ok(p.dot(u) + spec.control_cost.eval(u))
}

/// Minimum-value Hamiltonian `H_min(p) = inf_{u ∈ U} H_CV(p; u)` together
/// with its argmin — the Lipschitz selection used by the feedback map.
pub fn h_min(p: &DVector<f64>, spec: &HamiltonianSpec) -> (f64, DVector<f64>) {
    match (&spec.control_set, &spec.control_cost) {
        (ControlSet::Ball { radius }, ControlCost::Quadratic { eta }) => {
            let pn = p.norm();
            if pn <= eta * radius {
                let u = p * (-1.0 / eta);
                (-pn * pn / (2.0 * eta), u)
            } else {
                let u = p * (-radius / pn);
                (-radius * pn + 0.5 * eta * radius * radius, u)
            }
        }
        (ControlSet::Ball { radius }, ControlCost::Linear { coef }) => {
            let pn = p.norm();
            if pn <= *coef || pn == 0.0 {
                (0.0, DVector::zeros(p.len()))
            } else {
                let u = p * (-radius / pn);
                (radius * (coef - pn), u)
            }
        }
        (ControlSet::Box { lower, upper }, ControlCost::Quadratic { eta }) => {
            let mut value = 0.0;
            let u = DVector::from_fn(p.len(), |i, _| {
                let unconstrained = -p[i] / eta;
                let ui = unconstrained.clamp(lower[i], upper[i]);
                value += p[i] * ui + 0.5 * eta * ui * ui;
                ui
            });
            (value, u)
        }
        (ControlSet::Box { lower, upper }, ControlCost::Linear { .. }) => {
            // Euclidean |u| is not separable over the box; dense search.
            let m = p.len();
            let per_axis = 17usize;
            let mut best = (f64::MAX, DVector::zeros(m));
            let total = per_axis.pow(m as u32);
            for flat in 0..total {
                let mut rem = flat;
                let u = DVector::from_fn(m, |i, _| {
                    let idx = rem % per_axis;
                    rem /= per_axis;
                    lower[i] + (upper[i] - lower[i]) * idx as f64 / (per_axis - 1) as f64
                });
                let val = p.dot(&u) + spec.control_cost.eval(&u);
                if val < best.0 {
                    best = (val, u);
                }
            }
            best
        }
        (_, ControlCost::Custom { nodes, values }) => {
            let mut best = (f64::MAX, DVector::zeros(p.len()));
            for (node, &lv) in nodes.iter().zip(values) {
                let u = DVector::from_column_slice(node);
                let val = p.dot(&u) + lv;
                if val < best.0 {
                    best = (val, u);
                }
            }
            best
        }
    }
}

/// Closed form of `κ₀ ∫_0^∞ e^{-λt} (t^{-γ} ∨ 1) dt`:
/// `κ₀ (λ^{γ-1} γ_low(1-γ, λ) + e^{-λ}/λ)` with the lower incomplete gamma
/// `γ_low`. `γ = 0` reduces to `κ₀/λ`.
pub fn contraction_bound(lambda: f64, gamma: f64, kappa0: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::BadExponent(gamma));
    }
    if lambda <= 0.0 {
        return Err(Error::InvalidConfig(format!("lambda = {lambda} must be positive")));
    }
    if kappa0 == 0.0 {
        return Ok(0.0);
    }
    let singular = lambda.powf(gamma - 1.0) * gamma_li(1.0 - gamma, lambda);
    Ok(kappa0 * (singular + (-lambda).exp() / lambda))
}

/// Smallest `λ` (log-bisection) whose certified contraction factor
/// `L_H · contraction_bound(λ, γ̂, κ̂₀)` is at most the 0.9 safety margin.
pub fn lambda_threshold(estimate: &EstimateReport, control_set: &ControlSet) -> Result<f64> {
    const MARGIN: f64 = 0.9;
    const LAMBDA_MIN: f64 = 1e-6;
    const LAMBDA_MAX: f64 = 1e6;
    let l_h = control_set.sup_norm();
    let gamma = estimate.gamma().min(1.0 - 1e-9);
    let factor = |lambda: f64| -> Result<f64> {
        Ok(l_h * contraction_bound(lambda, gamma, estimate.kappa0)?)
    };
    if factor(LAMBDA_MIN)? <= MARGIN {
        return Ok(LAMBDA_MIN);
    }
    if factor(LAMBDA_MAX)? > MARGIN {
        return Err(Error::NoThreshold(LAMBDA_MAX));
    }
    let (mut lo, mut hi) = (LAMBDA_MIN.ln(), LAMBDA_MAX.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if factor(mid.exp())? <= MARGIN {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.exp())
}

/// Product-integration rule for `∫_0^∞ e^{-λt} φ(t) dt` on a graded node
/// grid: `φ` linear between nodes, the discount factor exact per panel, head
/// and tail frozen at the boundary node values.
#[derive(Debug, Clone, Serialize)]
pub struct TimeQuadrature {
    pub lambda: f64,
    pub nodes: Vec<f64>,
    /// Per-node coefficients including head/tail freezes:
    /// `∫ ≈ Σ coeffs[i] φ(nodes[i])`.
    pub coeffs: Vec<f64>,
    pub t_cut: f64,
    pub t_max: f64,
}

impl TimeQuadrature {
    /// Default grading: 48 log-spaced nodes on `[1e-6, min(1, T)]` plus 48
    /// geometric nodes up to `T = 40/λ`.
    pub fn graded(lambda: f64) -> Result<Self> {
        Self::graded_with(lambda, 48, 48, 1e-6)
    }

    pub fn graded_with(lambda: f64, n_head: usize, n_tail: usize, t_cut: f64) -> Result<Self> {
        if lambda <= 0.0 {
            return Err(Error::InvalidConfig("lambda must be positive".into()));
        }
        let t_max = (40.0 / lambda).max(4.0 * t_cut);
        let split = 1.0_f64.min(t_max / 2.0);
        let mut nodes = crate::smoothing::geometric_grid(t_cut, split, n_head);
        if t_max > split {
            let tail = crate::smoothing::geometric_grid(split, t_max, n_tail + 1);
            nodes.extend_from_slice(&tail[1..]);
        }
        Ok(Self::from_nodes(lambda, nodes))
    }

    /// Builds the product-integration coefficients for arbitrary increasing
    /// nodes.
    pub fn from_nodes(lambda: f64, nodes: Vec<f64>) -> Self {
        assert!(nodes.len() >= 2);
        let n = nodes.len();
        let mut coeffs = vec![0.0; n];
        for i in 0..n - 1 {
            let (a, b) = (nodes[i], nodes[i + 1]);
            let width = b - a;
            let i0 = ((-lambda * a).exp() - (-lambda * b).exp()) / lambda;
            let i1 = (i0 / lambda - width * (-lambda * b).exp() / lambda) / width;
            coeffs[i] += i0 - i1;
            coeffs[i + 1] += i1;
        }
        // Head: φ frozen at the first node on [0, t_cut];
        // tail: φ frozen at the last node on [T, ∞).
        let t_cut = nodes[0];
        let t_max = nodes[n - 1];
        coeffs[0] += (1.0 - (-lambda * t_cut).exp()) / lambda;
        coeffs[n - 1] += (-lambda * t_max).exp() / lambda;
        TimeQuadrature { lambda, nodes, coeffs, t_cut, t_max }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.coeffs).map(|(v, c)| v * c).sum()
    }

    /// Conservative error budget for the head/tail freezes of the value
    /// channel: `sup|φ| (t_cut + 2 e^{-λT}/λ)`.
    pub fn budget_value(&self, sup_phi: f64) -> f64 {
        sup_phi * (self.t_cut + 2.0 * (-self.lambda * self.t_max).exp() / self.lambda)
    }

    /// Budget for the gradient channel, where the integrand is additionally
    /// bounded by `κ₀ t^{-γ} sup|φ|` near zero.
    pub fn budget_gradient(&self, sup_phi: f64, kappa0: f64, gamma: f64) -> f64 {
        let head = kappa0 * self.t_cut.powf(1.0 - gamma) / (1.0 - gamma);
        sup_phi * (head + 2.0 * (-self.lambda * self.t_max).exp() / self.lambda)
    }
}

/// Solver tuning knobs.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub scheme: QuadScheme,
    /// Consistency-check finite-difference step.
    pub fd_step: f64,
}

impl Default for SolveOptions {
    // tol is matched to what the default grid representation resolves: the
    // mild-solution consistency check (∇ᴮv = w through two quadrature
    // routes) bottoms out near 1.6e-3 on 33-node grids at GH order 20, so the
    // 10·tol coupling needs tol ≥ 1.6e-4.
    fn default() -> Self {
        SolveOptions {
            tol: 2e-4,
            max_iter: 400,
            scheme: QuadScheme::GaussHermite { order: 20 },
            fd_step: 1e-4,
        }
    }
}

/// The solved value function and its control-direction gradient, with solver
/// diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct ValueSolution {
    pub v: ScalarGrid,
    pub w: VectorGrid,
    pub lambda: f64,
    pub residual_history: Vec<f64>,
    /// Certified contraction factor `L_H · contraction_bound(λ, γ̂, κ̂₀)`.
    pub contraction_bound: f64,
    pub iterations: usize,
    pub converged: bool,
    pub tol: f64,
    /// Sup gap between ŵ and the finite-difference gradient of the `F₁`
    /// integral over interior grid nodes (the mild-solution identity
    /// `∇ᴮ v = w`).
    pub consistency_gap: f64,
    /// Coarse diagnostic: grid-node central differences of the tabulated v̂
    /// against ŵ (limited by the grid resolution, not by the solve).
    pub grid_fd_gap: f64,
    pub error_budget_value: f64,
    pub error_budget_gradient: f64,
    pub below_threshold: bool,
}

/// Per-time-node data reused across grid nodes in one `F` application.
struct TimeSlice {
    mean_matrix: DMatrix<f64>,
    law_template: ProjectedGaussian,
    lambda_op: DMatrix<f64>,
}

fn build_time_slices(
    model: &SpectralModel,
    tq: &TimeQuadrature,
) -> Result<Vec<TimeSlice>> {
    tq.nodes
        .iter()
        .map(|&t| {
            let mean_matrix = model.projected_semigroup(t)?;
            let (_, root) = model.covariance_projected(t)?;
            let law_template = ProjectedGaussian::from_mean_root(DVector::zeros(model.dim_p), &root);
            let (lambda_op, _) = crate::smoothing::lambda_operator(model, t)?;
            Ok(TimeSlice { mean_matrix, law_template, lambda_op })
        })
        .collect()
}

/// Evaluates `(F₁[w], F₂[w])` at arbitrary projected points. The integrand
/// `ℓ̄₀(y) + H_min(ŵ(y))` is shared between both channels and between all
/// time nodes.
fn apply_f_at_points(
    model: &SpectralModel,
    spec: &HamiltonianSpec,
    w: &VectorGrid,
    tq: &TimeQuadrature,
    slices: &[TimeSlice],
    scheme: QuadScheme,
    points: &[DVector<f64>],
) -> Result<Vec<(f64, DVector<f64>)>> {
    let m = model.dim_k;
    let integrand = |y: &DVector<f64>| -> f64 {
        let p = w.eval(y);
        spec.state_cost.eval(y) + h_min(&p, spec).0
    };
    points
        .par_iter()
        .map(|z| {
            let mut vals = vec![0.0; tq.len()];
            let mut grads = vec![DVector::zeros(m); tq.len()];
            for (i, slice) in slices.iter().enumerate() {
                let law = ProjectedGaussian {
                    mean: &slice.mean_matrix * z,
                    directions: slice.law_template.directions.clone(),
                    scales: slice.law_template.scales.clone(),
                };
                let out = expect_weighted_multi(integrand, &law, &slice.lambda_op, scheme)?;
                vals[i] = out.mean_value;
                grads[i] = out.values;
            }
            let f1 = tq.integrate(&vals);
            let mut f2 = DVector::zeros(m);
            for (i, g) in grads.iter().enumerate() {
                f2.axpy(tq.coeffs[i], g, 1.0);
            }
            Ok((f1, f2))
        })
        .collect()
}

/// One application of the operator `F = (F₁, F₂)` on the grid.
pub fn apply_f(
    model: &SpectralModel,
    spec: &HamiltonianSpec,
    lambda: f64,
    w: &VectorGrid,
    tq: &TimeQuadrature,
    scheme: QuadScheme,
) -> Result<(ScalarGrid, VectorGrid)> {
    assert_eq!(lambda, tq.lambda, "quadrature built for a different lambda");
    let slices = build_time_slices(model, tq)?;
    let grid_spec = spec.state_cost.spec.clone();
    let points: Vec<DVector<f64>> =
        (0..grid_spec.total_nodes()).map(|i| grid_spec.node_coords(i)).collect();
    let results = apply_f_at_points(model, spec, w, tq, &slices, scheme, &points)?;
    let mut v_values = Vec::with_capacity(results.len());
    let mut w_values = Vec::with_capacity(results.len() * model.dim_k);
    for (f1, f2) in results {
        v_values.push(f1);
        w_values.extend(f2.iter());
    }
    Ok((
        ScalarGrid::new(grid_spec.clone(), v_values)?,
        VectorGrid::new(grid_spec, model.dim_k, w_values)?,
    ))
}

/// Picard iteration from `(0, 0)` (or a supplied start) to the fixed point.
#[allow(clippy::too_many_arguments)]
pub fn solve_fixed_point(
    model: &SpectralModel,
    spec: &HamiltonianSpec,
    lambda: f64,
    estimate: &EstimateReport,
    options: &SolveOptions,
    init: Option<(ScalarGrid, VectorGrid)>,
) -> Result<ValueSolution> {
    let tq = TimeQuadrature::graded(lambda)?;
    let slices = build_time_slices(model, &tq)?;
    let grid_spec = spec.state_cost.spec.clone();
    let points: Vec<DVector<f64>> =
        (0..grid_spec.total_nodes()).map(|i| grid_spec.node_coords(i)).collect();

    let certified = control_lipschitz(spec) * contraction_bound(lambda, estimate.gamma(), estimate.kappa0)?;
    let threshold = lambda_threshold(estimate, &spec.control_set)?;

    let (mut v, mut w) = match init {
        Some((v0, w0)) => (v0, w0),
        None => (
            ScalarGrid::constant(grid_spec.clone(), 0.0)?,
            VectorGrid::zeros(grid_spec.clone(), model.dim_k),
        ),
    };

    let mut residual_history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut ratio_exceeded = 0usize;
    let mut last_input_w = w.clone();

    for iter in 0..options.max_iter {
        iterations = iter + 1;
        let results = apply_f_at_points(model, spec, &w, &tq, &slices, options.scheme, &points)?;
        let mut v_values = Vec::with_capacity(results.len());
        let mut w_values = Vec::with_capacity(results.len() * model.dim_k);
        for (f1, f2) in &results {
            v_values.push(*f1);
            w_values.extend(f2.iter());
        }
        let v_next = ScalarGrid::new(grid_spec.clone(), v_values)?;
        let w_next = VectorGrid::new(grid_spec.clone(), model.dim_k, w_values)?;

        let residual = v.sup_distance(&v_next).max(w.sup_distance(&w_next));
        if let Some(&prev) = residual_history.last() {
            if prev > 0.0 && residual / prev > 1.0 {
                ratio_exceeded += 1;
                if ratio_exceeded >= 3 {
                    return Err(Error::NotContracted { iteration: iterations, residual });
                }
            } else {
                ratio_exceeded = 0;
            }
        }
        residual_history.push(residual);
        last_input_w = w.clone();
        v = v_next;
        w = w_next;
        if residual <= options.tol {
            converged = true;
            break;
        }
    }

    // Mild-solution identity ∇ᴮ v = w: central differences of the F₁ integral
    // along the projected control directions at interior nodes, against ŵ.
    let consistency_gap = consistency_check(
        model, spec, &last_input_w, &w, &tq, &slices, options, &points, &grid_spec,
    )?;
    let grid_fd_gap = grid_fd_check(model, &v, &w);

    let sup_integrand = spec.state_cost.sup_norm() + h_min_sup_bound(spec, &w);
    Ok(ValueSolution {
        v,
        w,
        lambda,
        residual_history,
        contraction_bound: certified,
        iterations,
        converged,
        tol: options.tol,
        consistency_gap,
        grid_fd_gap,
        error_budget_value: tq.budget_value(sup_integrand),
        error_budget_gradient: tq.budget_gradient(sup_integrand, estimate.kappa0, estimate.gamma()),
        below_threshold: lambda < threshold,
    })
}

/// `L_H = sup_{u∈U} |u|`.
pub fn control_lipschitz(spec: &HamiltonianSpec) -> f64 {
    spec.control_set.sup_norm()
}

/// Crude bound on `|H_min(ŵ(z))|` over the grid.
fn h_min_sup_bound(spec: &HamiltonianSpec, w: &VectorGrid) -> f64 {
    let p_sup = w.sup_norm() * (w.value_dim as f64).sqrt();
    let l1_at_zero = spec.control_cost.eval(&DVector::zeros(w.value_dim)).abs();
    control_lipschitz(spec) * p_sup + l1_at_zero
}

#[allow(clippy::too_many_arguments)]
fn consistency_check(
    model: &SpectralModel,
    spec: &HamiltonianSpec,
    w_input: &VectorGrid,
    w_out: &VectorGrid,
    tq: &TimeQuadrature,
    slices: &[TimeSlice],
    options: &SolveOptions,
    points: &[DVector<f64>],
    grid_spec: &crate::grid::GridSpec,
) -> Result<f64> {
    let b0 = model.projected_control();
    let h = options.fd_step;
    let mut shifted = Vec::new();
    let mut index = Vec::new();
    for (flat, z) in points.iter().enumerate() {
        if !grid_spec.is_interior(flat) {
            continue;
        }
        for l in 0..model.dim_k {
            let dir = b0.column(l).clone_owned();
            shifted.push(z + &dir * h);
            shifted.push(z - &dir * h);
            index.push((flat, l));
        }
    }
    if shifted.is_empty() {
        return Ok(0.0);
    }
    let evals = apply_f_at_points(model, spec, w_input, tq, slices, options.scheme, &shifted)?;
    let mut gap: f64 = 0.0;
    for (pair, &(flat, l)) in index.iter().enumerate() {
        let up = evals[2 * pair].0;
        let down = evals[2 * pair + 1].0;
        let fd = (up - down) / (2.0 * h);
        let wl = w_out.node_value(flat)[l];
        gap = gap.max((fd - wl).abs());
    }
    Ok(gap)
}

/// Grid-node central differences of the tabulated v̂ against ŵ; resolution-
/// limited, reported as a diagnostic only.
fn grid_fd_check(model: &SpectralModel, v: &ScalarGrid, w: &VectorGrid) -> f64 {
    let spec = &v.spec;
    let b0 = model.projected_control();
    let n = spec.dim();
    let mut gap: f64 = 0.0;
    for flat in 0..spec.total_nodes() {
        if !spec.is_interior(flat) {
            continue;
        }
        let z = spec.node_coords(flat);
        // ∂v/∂z_a by symmetric grid-step differences.
        let mut grad = DVector::zeros(n);
        for a in 0..n {
            let h = spec.step(a);
            let mut zp = z.clone();
            zp[a] += h;
            let mut zm = z.clone();
            zm[a] -= h;
            grad[a] = (v.eval(&zp) - v.eval(&zm)) / (2.0 * h);
        }
        let expected = b0.transpose() * grad;
        let actual = w.node_value(flat);
        gap = gap.max((expected - actual).amax());
    }
    gap
}
