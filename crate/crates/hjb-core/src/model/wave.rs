//! Wave equation with distributed control on `(0,1)`.
//!
//! Per Laplacian mode `j` with frequency `ω_j = c·jπ` the first-order system
//! in energy coordinates `(p, q) = (c κ_j u_j, v_j)` evolves by the rotation
//!
//! ```text
//! e^{tA} = [  cos(ω t)  sin(ω t) ]
//!          [ -sin(ω t)  cos(ω t) ]
//! ```
//!
//! so the energy norm is the Euclidean norm and is conserved exactly. The
//! control acts on the velocity component (`B u: q_l += u_l`), as does the
//! noise through the coefficient rows of `σ`.
//!
//! The covariance `Q_t = ∫_0^t e^{sA} G G* e^{sA*} ds` is evaluated in closed
//! form from the trigonometric product integrals
//! `∫ sin(ω_j s) sin(ω_k s) ds` etc.; the `sin·sin` integral cancels to
//! `O(t³)` as `t ↓ 0` and switches to a series there.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::{ModelConfig, ProjectionSpec, SpectralModel, StateVector};

pub(super) fn validate(config: &ModelConfig) -> Result<()> {
    if config.wave_speed <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "wave_speed = {} must be positive",
            config.wave_speed
        )));
    }
    if config.dim_k == 0 || config.dim_k > config.dim_h {
        return Err(Error::InvalidConfig(format!(
            "wave control dimension {} must lie in 1..={}",
            config.dim_k, config.dim_h
        )));
    }
    if config.noise_scale < 0.0 {
        return Err(Error::InvalidConfig("noise_scale must be nonnegative".into()));
    }
    Ok(())
}

/// Mode frequency `ω_j = c (j+1) π` (0-based mode index).
fn omega(model: &SpectralModel, j: usize) -> f64 {
    model.wave_speed * (j + 1) as f64 * std::f64::consts::PI
}

pub(super) fn sigma_matrix(config: &ModelConfig) -> Result<DMatrix<f64>> {
    match &config.sigma {
        None => Ok(DMatrix::from_fn(config.dim_k, config.dim_h, |i, j| {
            if i == j {
                1.0
            } else {
                0.0
            }
        })),
        Some(rows) => {
            if rows.len() != config.dim_k {
                return Err(Error::InvalidConfig(format!(
                    "sigma has {} rows, expected dim_k = {}",
                    rows.len(),
                    config.dim_k
                )));
            }
            for (i, row) in rows.iter().enumerate() {
                if row.len() != config.dim_h {
                    return Err(Error::InvalidConfig(format!(
                        "sigma row {i} has {} entries, expected dim_h = {}",
                        row.len(),
                        config.dim_h
                    )));
                }
            }
            Ok(DMatrix::from_fn(config.dim_k, config.dim_h, |i, j| rows[i][j]))
        }
    }
}

/// Smallest eigenvalue of the projected noise Gram matrix (the noise-excited
/// block of `P G G* P*` on the retained modes). The theorem precondition
/// requires it strictly positive.
pub(super) fn check_projected_noise(config: &ModelConfig, model: &SpectralModel) -> Result<f64> {
    let count = match &config.projection {
        ProjectionSpec::Modes { count } => *count,
        _ => unreachable!("wave projection is mode-based"),
    };
    let sigma = model.sigma.as_ref().expect("wave model has sigma");
    let nu2 = model.noise_scale * model.noise_scale;
    let gram = DMatrix::from_fn(count, count, |a, b| {
        nu2 * (0..sigma.nrows()).map(|i| sigma[(i, a)] * sigma[(i, b)]).sum::<f64>()
    });
    let eig = gram.symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 1e-12 {
        return Err(Error::DegenerateNoise(min));
    }
    Ok(min)
}

pub(super) fn semigroup_apply(model: &SpectralModel, t: f64, x: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(x.len());
    for j in 0..model.dim_h {
        let (c, s) = {
            let wt = omega(model, j) * t;
            (wt.cos(), wt.sin())
        };
        let p = x[2 * j];
        let q = x[2 * j + 1];
        out[2 * j] = c * p + s * q;
        out[2 * j + 1] = -s * p + c * q;
    }
    out
}

pub(super) fn semigroup_matrix(model: &SpectralModel, t: f64) -> DMatrix<f64> {
    let dim = 2 * model.dim_h;
    let mut e = DMatrix::zeros(dim, dim);
    for j in 0..model.dim_h {
        let wt = omega(model, j) * t;
        let (c, s) = (wt.cos(), wt.sin());
        e[(2 * j, 2 * j)] = c;
        e[(2 * j, 2 * j + 1)] = s;
        e[(2 * j + 1, 2 * j)] = -s;
        e[(2 * j + 1, 2 * j + 1)] = c;
    }
    e
}

pub(super) fn noise_matrix(model: &SpectralModel) -> DMatrix<f64> {
    let sigma = model.sigma.as_ref().expect("wave model has sigma");
    let mut g = DMatrix::zeros(2 * model.dim_h, sigma.nrows());
    for i in 0..sigma.nrows() {
        for j in 0..model.dim_h {
            g[(2 * j + 1, i)] = model.noise_scale * sigma[(i, j)];
        }
    }
    g
}

pub(super) fn control_matrix(model: &SpectralModel) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(2 * model.dim_h, model.dim_k);
    for l in 0..model.dim_k {
        b[(2 * l + 1, l)] = 1.0;
    }
    b
}

/// `∫_0^t cos(w s) ds = t sinc(w t)`.
fn int_cos(w: f64, t: f64) -> f64 {
    let x = w * t;
    if x == 0.0 {
        t
    } else {
        (x.sin() / x) * t
    }
}

/// `∫_0^t sin(w s) ds = (1 - cos(w t))/w`, via `2 sin²(x/2)` for stability.
fn int_sin(w: f64, t: f64) -> f64 {
    if w == 0.0 {
        return 0.0;
    }
    let half = 0.5 * w * t;
    2.0 * half.sin() * half.sin() / w
}

/// `∫_0^t sin(a s) sin(b s) ds = ½ [∫cos((a-b)s) - ∫cos((a+b)s)]`.
///
/// The two terms cancel to `a b t³/3` as `t ↓ 0`; below `max(|st|,|dt|) = 0.1`
/// the difference is summed as a series in the factored form
/// `s^{2k} - d^{2k} = 4ab Σ s^{2i} d^{2(k-1-i)}`.
fn int_sin_sin(a: f64, b: f64, t: f64) -> f64 {
    let s = a + b;
    let d = a - b;
    let x = s.abs().max(d.abs()) * t;
    if x < 0.1 {
        let (s2, d2) = (s * s, d * d);
        // Factorials (2k+1)! for k = 1..4.
        let fact = [6.0, 120.0, 5040.0, 362880.0];
        let mut total = 0.0;
        let mut sign = 1.0;
        let mut t_pow = t * t * t;
        for (k, f) in fact.iter().enumerate() {
            // h_k = Σ_{i=0}^{k} s^{2i} d^{2(k-i)}
            let mut h = 0.0;
            let mut s_pow = 1.0;
            for i in 0..=k {
                let d_pow = d2.powi((k - i) as i32);
                h += s_pow * d_pow;
                s_pow *= s2;
            }
            total += sign * 4.0 * a * b * h * t_pow / f;
            sign = -sign;
            t_pow *= t * t;
        }
        0.5 * total
    } else {
        0.5 * (int_cos(d, t) - int_cos(s, t))
    }
}

/// `∫_0^t sin(a s) cos(b s) ds = ½ [∫sin((a+b)s) + ∫sin((a-b)s)]`.
fn int_sin_cos(a: f64, b: f64, t: f64) -> f64 {
    0.5 * (int_sin(a + b, t) + int_sin(a - b, t))
}

/// Closed-form `Q_t` in energy coordinates. Mode pair `(j,k)` couples through
/// `c_{jk} = ν² (σᵀσ)_{jk}`; the noise enters the velocity component only, so
/// each 2×2 block is `c_{jk} ∫ [sin_j; cos_j][sin_k; cos_k]ᵀ ds`.
pub(super) fn covariance_full(model: &SpectralModel, t: f64) -> DMatrix<f64> {
    let sigma = model.sigma.as_ref().expect("wave model has sigma");
    let n = model.dim_h;
    let nu2 = model.noise_scale * model.noise_scale;
    // σᵀσ on the retained modes.
    let coupling = DMatrix::from_fn(n, n, |a, b| {
        nu2 * (0..sigma.nrows()).map(|i| sigma[(i, a)] * sigma[(i, b)]).sum::<f64>()
    });
    let mut q = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for k in 0..n {
            let c = coupling[(j, k)];
            if c == 0.0 {
                continue;
            }
            let (a, b) = (omega(model, j), omega(model, k));
            q[(2 * j, 2 * k)] = c * int_sin_sin(a, b, t);
            q[(2 * j, 2 * k + 1)] = c * int_sin_cos(a, b, t);
            q[(2 * j + 1, 2 * k)] = c * int_sin_cos(b, a, t);
            q[(2 * j + 1, 2 * k + 1)] = c * 0.5 * (int_cos(a - b, t) + int_cos(a + b, t));
        }
    }
    q
}

pub(super) fn state_from_position_velocity(
    model: &SpectralModel,
    position: &[f64],
    velocity: &[f64],
) -> Result<StateVector> {
    if position.len() != model.dim_h || velocity.len() != model.dim_h {
        return Err(Error::DimensionMismatch {
            expected: model.dim_h,
            got: position.len().max(velocity.len()),
        });
    }
    let mut coeffs = DVector::zeros(2 * model.dim_h);
    for j in 0..model.dim_h {
        coeffs[2 * j] = omega(model, j) * position[j];
        coeffs[2 * j + 1] = velocity[j];
    }
    Ok(StateVector::new(coeffs, super::StateSpace::H))
}

pub(super) fn position_velocity(
    model: &SpectralModel,
    x: &StateVector,
) -> Result<(Vec<f64>, Vec<f64>)> {
    model.check_state_dim(x.coeffs.len())?;
    let mut position = Vec::with_capacity(model.dim_h);
    let mut velocity = Vec::with_capacity(model.dim_h);
    for j in 0..model.dim_h {
        position.push(x.coeffs[2 * j] / omega(model, j));
        velocity.push(x.coeffs[2 * j + 1]);
    }
    Ok((position, velocity))
}

