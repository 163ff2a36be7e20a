//! Heat equation with Dirichlet boundary control on `(0,1)`.
//!
//! Everything is diagonal in the sine eigenbasis `e_j = √2 sin(jπξ)`:
//!
//! * semigroup `e^{tA}: x_j ↦ e^{-λ_j t} x_j`, `λ_j = (jπ)²`;
//! * noise `G = ν (-A)^{-β}`, covariance
//!   `Q_t = ν² (-A)^{-2β} (I - e^{2tA}) / (2 (-A))`;
//! * Dirichlet lift of boundary data `(a_0, a_1)`:
//!   `⟨D(a_0,a_1), e_j⟩ = √2/(jπ) · (a_0 + (-1)^{j+1} a_1)`, so the control
//!   operator `B = -Ā D` has coefficients `√2 jπ (a_0 + (-1)^{j+1} a_1)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::{ModelConfig, SpectralModel};

pub(super) fn validate(config: &ModelConfig) -> Result<()> {
    if config.epsilon <= 0.0 || config.epsilon >= 0.25 {
        return Err(Error::InvalidExponents(format!(
            "epsilon = {} must lie in (0, 1/4)",
            config.epsilon
        )));
    }
    if config.alpha <= config.beta + 0.25 {
        return Err(Error::InvalidExponents(format!(
            "alpha = {} must exceed beta + 1/4 = {}",
            config.alpha,
            config.beta + 0.25
        )));
    }
    if config.beta < 0.0 {
        return Err(Error::InvalidExponents(format!(
            "beta = {} must be nonnegative",
            config.beta
        )));
    }
    if config.dim_k == 0 || config.dim_k > 2 {
        return Err(Error::InvalidConfig(format!(
            "heat boundary control has 1 or 2 channels, got {}",
            config.dim_k
        )));
    }
    if config.noise_scale < 0.0 {
        return Err(Error::InvalidConfig("noise_scale must be nonnegative".into()));
    }
    Ok(())
}

pub(super) fn semigroup_apply(model: &SpectralModel, t: f64, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x.len(), |j, _| x[j] * (-model.eigenvalues[j] * t).exp())
}

pub(super) fn semigroup_matrix(model: &SpectralModel, t: f64) -> DMatrix<f64> {
    DMatrix::from_diagonal(&model.eigenvalues.map(|l| (-l * t).exp()))
}

pub(super) fn noise_matrix(model: &SpectralModel) -> DMatrix<f64> {
    DMatrix::from_diagonal(
        &model
            .eigenvalues
            .map(|l: f64| model.noise_scale * l.powf(-model.beta)),
    )
}

/// Diagonal entry `q_j(t) = ν² λ_j^{-2β} (1 - e^{-2 λ_j t}) / (2 λ_j)`,
/// evaluated through `expm1` to stay accurate at small `λ_j t`.
pub(super) fn covariance_diag_entry(model: &SpectralModel, lambda: f64, t: f64) -> f64 {
    let nu2 = model.noise_scale * model.noise_scale;
    nu2 * lambda.powf(-2.0 * model.beta) * (-(-2.0 * lambda * t).exp_m1()) / (2.0 * lambda)
}

pub(super) fn covariance_full(model: &SpectralModel, t: f64) -> DMatrix<f64> {
    DMatrix::from_diagonal(&model.eigenvalues.map(|l| covariance_diag_entry(model, l, t)))
}

/// Stationary covariance `ν² λ_j^{-2β} / (2 λ_j)`.
pub(super) fn covariance_stationary(model: &SpectralModel) -> DMatrix<f64> {
    let nu2 = model.noise_scale * model.noise_scale;
    DMatrix::from_diagonal(
        &model
            .eigenvalues
            .map(|l: f64| nu2 * l.powf(-2.0 * model.beta) / (2.0 * l)),
    )
}

/// Columns of `B`: channel 0 is the boundary point `ξ = 0`, channel 1 (when
/// present) the boundary point `ξ = 1`.
pub(super) fn control_matrix(model: &SpectralModel) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(model.dim_h, model.dim_k);
    for j in 0..model.dim_h {
        let jpi = (j + 1) as f64 * std::f64::consts::PI;
        let base = std::f64::consts::SQRT_2 * jpi;
        b[(j, 0)] = base;
        if model.dim_k > 1 {
            let sign = if (j + 1) % 2 == 1 { 1.0 } else { -1.0 };
            b[(j, 1)] = base * sign;
        }
    }
    b
}
