//! Canonical problem setups used by the verification suite and the shipped
//! example configurations.

use crate::error::Result;
use crate::grid::{GridSpec, ScalarGrid};
use crate::hjb::{ControlCost, ControlSet, HamiltonianSpec};
use crate::model::{ModelConfig, SpectralModel};
use crate::smoothing::{fit_exponent, EstimateReport};

/// Default heat control problem: quadratic state cost on the projected
/// coordinate, ball-constrained control with quadratic running cost.
///
/// Grid bounds are ±5 stationary standard deviations of the projected
/// uncontrolled process; values are clamped outside, keeping the tabulated
/// cost bounded.
pub struct HeatProblem {
    pub model: SpectralModel,
    pub spec: HamiltonianSpec,
    pub estimate: EstimateReport,
}

/// Builds the default heat problem, fitting the smoothing envelope used by
/// the contraction certificate over `[1e-5, 1e-2]`.
pub fn default_heat_problem(grid_nodes: usize) -> Result<HeatProblem> {
    let model = SpectralModel::new(&ModelConfig::heat_default())?;
    let spec = heat_spec(&model, grid_nodes)?;
    let estimate = fit_exponent(&model, 1e-5, 1e-2, 24)?;
    Ok(HeatProblem { model, spec, estimate })
}

/// The Hamiltonian data of the default heat problem for a given grid size.
pub fn heat_spec(model: &SpectralModel, grid_nodes: usize) -> Result<HamiltonianSpec> {
    let std = model
        .stationary_projected_std()
        .expect("heat model has a stationary law");
    let half: Vec<f64> = std.iter().map(|s| 5.0 * s).collect();
    let grid = GridSpec::symmetric(&half, grid_nodes)?;
    let state_cost = ScalarGrid::from_fn(grid, |z| z.norm_squared())?;
    HamiltonianSpec::new(
        ControlSet::Ball { radius: 0.25 },
        ControlCost::Quadratic { eta: 1.0 },
        state_cost,
    )
}

/// Wave model at the truncation used by the smoothing-exponent check
/// (8 modes, identity noise, spectral projection onto the first two modes).
pub fn acceptance_wave_model() -> Result<SpectralModel> {
    let config = ModelConfig {
        dim_h: 8,
        dim_k: 8,
        ..ModelConfig::wave_default()
    };
    SpectralModel::new(&config)
}
