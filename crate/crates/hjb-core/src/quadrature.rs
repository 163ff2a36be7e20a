//! Expectations against the projected Gaussian laws `N(mean, Q̄_t)`.
//!
//! Low-dimensional laws (`n ≤ 3`) use tensor Gauss–Hermite rules in the
//! principal axes of the covariance; higher dimensions fall back to seeded
//! Monte Carlo with counter-based per-sample streams, so results are
//! reproducible and independent of evaluation order.
//!
//! Degenerate covariance directions (rank < n) are integrated over the range
//! of the covariance root only; `Q̄_t → 0` as `t ↓ 0` makes this the common
//! case rather than the exception.
//!
//! The weighted expectation `E[g(mean + y) ⟨w, Q̄^{-1/2} y⟩]` is the
//! Cameron–Martin functional the gradient formula of the Ornstein–Uhlenbeck
//! semigroup consumes; in principal coordinates the weight factor is a plain
//! inner product with the standardized normal vector.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::SymmetricRoot;
use crate::seed::derive_seed;

/// Hard cap on the tensor Gauss–Hermite grid (20³).
pub const MAX_TENSOR_POINTS: usize = 8000;

/// Mean and covariance factor of a projected Gaussian law.
#[derive(Debug, Clone)]
pub struct ProjectedGaussian {
    pub mean: DVector<f64>,
    /// Principal directions (columns), one per retained rank.
    pub directions: DMatrix<f64>,
    /// Standard deviations along the principal directions.
    pub scales: DVector<f64>,
}

impl ProjectedGaussian {
    pub fn from_mean_cov(mean: DVector<f64>, cov: &DMatrix<f64>) -> Self {
        let root = SymmetricRoot::new(cov);
        Self::from_mean_root(mean, &root)
    }

    pub fn from_mean_root(mean: DVector<f64>, root: &SymmetricRoot) -> Self {
        assert_eq!(mean.len(), root.dim);
        ProjectedGaussian {
            mean,
            directions: root.vectors.clone(),
            scales: root.eigenvalues.map(f64::sqrt),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Number of retained (non-degenerate) directions.
    pub fn rank(&self) -> usize {
        self.scales.len()
    }

    /// Point of the law for standardized coordinates `xi` (length = rank).
    fn point(&self, xi: &[f64]) -> DVector<f64> {
        let mut y = self.mean.clone();
        for (i, &x) in xi.iter().enumerate() {
            y.axpy(self.scales[i] * x, &self.directions.column(i).clone_owned(), 1.0);
        }
        y
    }

    /// Components of `w` along the principal directions, plus the norm of the
    /// component outside the range of the covariance root.
    fn weight_components(&self, w: &DVector<f64>) -> (DVector<f64>, f64) {
        let coeffs = self.directions.transpose() * w;
        let inside = &self.directions * &coeffs;
        let off = (w - inside).norm();
        (coeffs, off)
    }
}

/// Quadrature scheme selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadScheme {
    GaussHermite { order: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

impl QuadScheme {
    /// Default policy: tensor Gauss–Hermite of order 20 for rank ≤ 3, seeded
    /// Monte Carlo above.
    pub fn auto(rank: usize, seed: u64) -> Self {
        if rank <= 3 {
            QuadScheme::GaussHermite { order: 20 }
        } else {
            QuadScheme::MonteCarlo { samples: 200_000, seed }
        }
    }
}

/// Expectation value with the Monte Carlo standard error when applicable.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub std_error: Option<f64>,
}

/// Weighted expectation per weight column, with the off-range norms of the
/// weight vectors (nonzero when a weight leaves the covariance range; the
/// null-space component contributes zero by convention). `mean_value` is the
/// plain expectation `E[g]` from the same pass.
#[derive(Debug, Clone)]
pub struct WeightedResult {
    pub values: DVector<f64>,
    pub std_errors: Option<DVector<f64>>,
    pub off_range: DVector<f64>,
    pub mean_value: f64,
}

/// Probabilists' Gauss–Hermite nodes and weights (integrates against
/// `N(0,1)`; weights sum to 1, exact for polynomials of degree `< 2·order`).
///
/// Golub–Welsch: the Jacobi matrix of the monic Hermite recurrence
/// `He_{k+1} = x He_k - k He_{k-1}` is tridiagonal with zero diagonal and
/// off-diagonal `√k`; nodes are its eigenvalues and weights the squared first
/// eigenvector components. Rules are cached per order (the solver requests
/// the same rule millions of times).
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    use std::collections::HashMap;
    use std::sync::{Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&order) {
        return rule.clone();
    }
    let rule = gauss_hermite_uncached(order);
    cache.lock().unwrap().insert(order, rule.clone());
    rule
}

fn gauss_hermite_uncached(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let mut jacobi = DMatrix::zeros(order, order);
    for k in 1..order {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| {
            let w = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], w * w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `E[g(Y)]` for `Y ~ law`.
pub fn expect(
    g: impl Fn(&DVector<f64>) -> f64,
    law: &ProjectedGaussian,
    scheme: QuadScheme,
) -> Result<QuadResult> {
    match scheme {
        QuadScheme::GaussHermite { order } => {
            let mut value = 0.0;
            for_each_tensor_node(law, order, |weight, point, _xi| {
                let gv = g(point);
                if !gv.is_finite() {
                    return Err(Error::NonFiniteIntegrand(point.iter().cloned().collect()));
                }
                value += weight * gv;
                Ok(())
            })?;
            Ok(QuadResult { value, std_error: None })
        }
        QuadScheme::MonteCarlo { samples, seed } => {
            let (mean, var) = mc_moments(samples, seed, law, |point, _| g(point))?;
            Ok(QuadResult {
                value: mean,
                std_error: Some((var / samples as f64).sqrt()),
            })
        }
    }
}

/// `E[g(Y) ⟨w_l, Q̄^{-1/2}(Y - mean)⟩]` for every weight column `w_l`.
///
/// In principal coordinates `Y = mean + Σ scale_i ξ_i u_i` the factor is
/// `⟨U ᵀ w_l, ξ⟩` with `ξ` standard normal.
pub fn expect_weighted_multi(
    g: impl Fn(&DVector<f64>) -> f64,
    law: &ProjectedGaussian,
    weights: &DMatrix<f64>,
    scheme: QuadScheme,
) -> Result<WeightedResult> {
    let m = weights.ncols();
    let mut coeff_cols = DMatrix::zeros(law.rank(), m);
    let mut off_range = DVector::zeros(m);
    for l in 0..m {
        let (coeffs, off) = law.weight_components(&weights.column(l).clone_owned());
        coeff_cols.set_column(l, &coeffs);
        off_range[l] = off;
    }

    match scheme {
        QuadScheme::GaussHermite { order } => {
            let mut values = DVector::zeros(m);
            let mut mean_value = 0.0;
            for_each_tensor_node(law, order, |weight, point, xi| {
                let gv = g(point);
                if !gv.is_finite() {
                    return Err(Error::NonFiniteIntegrand(point.iter().cloned().collect()));
                }
                mean_value += weight * gv;
                for l in 0..m {
                    let fac: f64 = (0..law.rank()).map(|i| coeff_cols[(i, l)] * xi[i]).sum();
                    values[l] += weight * gv * fac;
                }
                Ok(())
            })?;
            Ok(WeightedResult { values, std_errors: None, off_range, mean_value })
        }
        QuadScheme::MonteCarlo { samples, seed } => {
            let mut sums: DVector<f64> = DVector::zeros(m);
            let mut sq_sums: DVector<f64> = DVector::zeros(m);
            let mut mean_sum = 0.0;
            let mut xi_buf = vec![0.0; law.rank()];
            for s in 0..samples {
                let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, &[s as u64]));
                for x in xi_buf.iter_mut() {
                    *x = StandardNormal.sample(&mut rng);
                }
                let point = law.point(&xi_buf);
                let gv = g(&point);
                if !gv.is_finite() {
                    return Err(Error::NonFiniteIntegrand(point.iter().cloned().collect()));
                }
                mean_sum += gv;
                for l in 0..m {
                    let fac: f64 = (0..law.rank()).map(|i| coeff_cols[(i, l)] * xi_buf[i]).sum();
                    let term = gv * fac;
                    sums[l] += term;
                    sq_sums[l] += term * term;
                }
            }
            let n = samples as f64;
            let values: DVector<f64> = sums.map(|s| s / n);
            let std_errors = DVector::from_fn(m, |l, _| {
                let var: f64 = (sq_sums[l] / n - values[l] * values[l]).max(0.0);
                (var / n).sqrt()
            });
            Ok(WeightedResult {
                values,
                std_errors: Some(std_errors),
                off_range,
                mean_value: mean_sum / n,
            })
        }
    }
}

/// Single-weight wrapper around [`expect_weighted_multi`].
pub fn expect_weighted(
    g: impl Fn(&DVector<f64>) -> f64,
    law: &ProjectedGaussian,
    weight: &DVector<f64>,
    scheme: QuadScheme,
) -> Result<(QuadResult, f64)> {
    let w = DMatrix::from_column_slice(weight.len(), 1, weight.as_slice());
    let out = expect_weighted_multi(g, law, &w, scheme)?;
    Ok((
        QuadResult {
            value: out.values[0],
            std_error: out.std_errors.as_ref().map(|s| s[0]),
        },
        out.off_range[0],
    ))
}

fn for_each_tensor_node(
    law: &ProjectedGaussian,
    order: usize,
    mut visit: impl FnMut(f64, &DVector<f64>, &[f64]) -> Result<()>,
) -> Result<()> {
    let rank = law.rank();
    if order < 2 {
        return Err(Error::InvalidConfig("Gauss-Hermite order must be at least 2".into()));
    }
    let total = order.checked_pow(rank as u32).filter(|&t| t <= MAX_TENSOR_POINTS);
    let Some(total) = total else {
        return Err(Error::InvalidConfig(format!(
            "tensor Gauss-Hermite grid {order}^{rank} exceeds the {MAX_TENSOR_POINTS}-point cap; use Monte Carlo"
        )));
    };
    if rank == 0 {
        // Fully degenerate law: a point mass at the mean.
        return visit(1.0, &law.mean, &[]);
    }
    let (nodes, weights) = gauss_hermite(order);
    let mut xi = vec![0.0; rank];
    for flat in 0..total {
        let mut rem = flat;
        let mut weight = 1.0;
        for x in xi.iter_mut() {
            let idx = rem % order;
            rem /= order;
            *x = nodes[idx];
            weight *= weights[idx];
        }
        let point = law.point(&xi);
        visit(weight, &point, &xi)?;
    }
    Ok(())
}

fn mc_moments(
    samples: usize,
    seed: u64,
    law: &ProjectedGaussian,
    f: impl Fn(&DVector<f64>, &[f64]) -> f64,
) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::InvalidConfig("Monte Carlo needs at least one sample".into()));
    }
    let mut sum = 0.0;
    let mut sq_sum = 0.0;
    let mut xi = vec![0.0; law.rank()];
    for s in 0..samples {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, &[s as u64]));
        for x in xi.iter_mut() {
            *x = StandardNormal.sample(&mut rng);
        }
        let point = law.point(&xi);
        let v = f(&point, &xi);
        if !v.is_finite() {
            return Err(Error::NonFiniteIntegrand(point.iter().cloned().collect()));
        }
        sum += v;
        sq_sum += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    Ok((mean, (sq_sum / n - mean * mean).max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn law_1d(var: f64) -> ProjectedGaussian {
        ProjectedGaussian::from_mean_cov(
            DVector::zeros(1),
            &DMatrix::from_element(1, 1, var),
        )
    }

    #[test]
    fn gauss_hermite_weights_are_normalized_moments() {
        let (nodes, weights) = gauss_hermite(20);
        let m0: f64 = weights.iter().sum();
        let m2: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * x * x).sum();
        let m4: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * x.powi(4)).sum();
        assert_relative_eq!(m0, 1.0, epsilon = 1e-13);
        assert_relative_eq!(m2, 1.0, epsilon = 1e-12);
        assert_relative_eq!(m4, 3.0, epsilon = 1e-11);
    }

    #[test]
    fn expectation_of_one_is_exactly_one() {
        let law = law_1d(0.087245);
        let r = expect(|_| 1.0, &law, QuadScheme::GaussHermite { order: 20 }).unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn odd_moment_vanishes() {
        let law = law_1d(0.3);
        let r = expect(|y| y[0], &law, QuadScheme::GaussHermite { order: 20 }).unwrap();
        assert!(r.value.abs() < 1e-12);
    }

    #[test]
    fn second_moment_matches_covariance() {
        // Covariance value from the heat 1-mode projected covariance example.
        let var = 0.087245;
        let law = law_1d(var);
        let r = expect(|y| y[0] * y[0], &law, QuadScheme::GaussHermite { order: 2 }).unwrap();
        assert_relative_eq!(r.value, var, epsilon = 1e-10);
    }

    #[test]
    fn weighted_expectation_of_constant_vanishes() {
        let law = law_1d(0.5);
        let (r, off) = expect_weighted(
            |_| 1.0,
            &law,
            &DVector::from_vec(vec![2.0]),
            QuadScheme::GaussHermite { order: 10 },
        )
        .unwrap();
        assert!(r.value.abs() < 1e-13);
        assert!(off < 1e-13);
    }

    #[test]
    fn gaussian_isometry_recovers_weight_norm() {
        // g(y) = <Qbar^{-1/2} y, w> paired against weight w gives |w|^2.
        let cov = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]);
        let law = ProjectedGaussian::from_mean_cov(DVector::zeros(2), &cov);
        let root = SymmetricRoot::new(&cov);
        let w = DVector::from_vec(vec![0.7, -1.2]);
        let w_clone = w.clone();
        let g = move |y: &DVector<f64>| {
            let std = root.apply_pinv_sqrt(&DMatrix::from_column_slice(2, 1, y.as_slice()));
            std.column(0).dot(&w_clone)
        };
        let (r, off) = expect_weighted(g, &law, &w, QuadScheme::GaussHermite { order: 8 }).unwrap();
        assert_relative_eq!(r.value, w.norm_squared(), max_relative = 1e-10);
        assert!(off < 1e-12);

        // Monte Carlo route agrees within 3 standard errors.
        let (mc, _) = expect_weighted(
            {
                let root = SymmetricRoot::new(&cov);
                let w = w.clone();
                move |y: &DVector<f64>| {
                    let std = root.apply_pinv_sqrt(&DMatrix::from_column_slice(2, 1, y.as_slice()));
                    std.column(0).dot(&w)
                }
            },
            &law,
            &w,
            QuadScheme::MonteCarlo { samples: 200_000, seed: 7 },
        )
        .unwrap();
        let se = mc.std_error.unwrap();
        assert!((mc.value - w.norm_squared()).abs() < 3.0 * se + 1e-12);
    }

    #[test]
    fn bounded_integrand_weighted_result_is_bounded_by_weight_norm() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.4, 0.0, 0.0, 0.2]);
        let law = ProjectedGaussian::from_mean_cov(DVector::zeros(2), &cov);
        let w = DVector::from_vec(vec![1.5, -0.4]);
        let (r, _) = expect_weighted(
            |y: &DVector<f64>| (5.0 * y[0]).sin(),
            &law,
            &w,
            QuadScheme::GaussHermite { order: 20 },
        )
        .unwrap();
        assert!(r.value.abs() <= w.norm() + 1e-10);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let law = law_1d(1.0);
        let scheme = QuadScheme::MonteCarlo { samples: 5000, seed: 42 };
        let a = expect(|y| y[0].cos(), &law, scheme).unwrap();
        let b = expect(|y| y[0].cos(), &law, scheme).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn degenerate_direction_is_skipped() {
        // Rank-1 covariance in 2d: integration runs over the range only.
        let v = DVector::from_vec(vec![1.0, 1.0]);
        let cov = &v * v.transpose();
        let law = ProjectedGaussian::from_mean_cov(DVector::zeros(2), &cov);
        assert_eq!(law.rank(), 1);
        let r = expect(
            |y| y[0] - y[1],
            &law,
            QuadScheme::GaussHermite { order: 10 },
        )
        .unwrap();
        assert!(r.value.abs() < 1e-12);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let law = law_1d(1.0);
        let err = expect(|y| (y[0] - y[0]) / 0.0, &law, QuadScheme::GaussHermite { order: 4 });
        assert!(matches!(err, Err(Error::NonFiniteIntegrand(_))));
    }

    #[test]
    fn linearity_in_integrand_and_weight() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.3, 0.05, 0.05, 0.6]);
        let law = ProjectedGaussian::from_mean_cov(
            DVector::from_vec(vec![0.2, -0.1]),
            &cov,
        );
        let scheme = QuadScheme::GaussHermite { order: 12 };
        let g1 = |y: &DVector<f64>| (y[0] + 0.3 * y[1]).tanh();
        let g2 = |y: &DVector<f64>| (y[0] * y[1]).sin();
        let a = expect(g1, &law, scheme).unwrap().value;
        let b = expect(g2, &law, scheme).unwrap().value;
        let combo = expect(|y| 2.0 * g1(y) - 0.5 * g2(y), &law, scheme).unwrap().value;
        assert_relative_eq!(combo, 2.0 * a - 0.5 * b, max_relative = 1e-12);

        let w1 = DVector::from_vec(vec![1.0, 0.0]);
        let w2 = DVector::from_vec(vec![0.3, -0.8]);
        let f1 = expect_weighted(g1, &law, &w1, scheme).unwrap().0.value;
        let f2 = expect_weighted(g1, &law, &w2, scheme).unwrap().0.value;
        let wsum = &w1 * 0.7 + &w2 * 1.9;
        let fsum = expect_weighted(g1, &law, &wsum, scheme).unwrap().0.value;
        assert_relative_eq!(fsum, 0.7 * f1 + 1.9 * f2, max_relative = 1e-10);
    }
}
