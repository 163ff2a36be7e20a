//! Symmetric PSD factorizations shared by the covariance and smoothing code.
//!
//! Projected covariances `Q̄_t = P Q_t P*` degenerate as `t ↓ 0`, so square
//! roots and inverse square roots are taken through a symmetric
//! eigendecomposition with an explicit rank cut: negative eigenvalues are
//! clamped to zero and eigenvalues below the relative floor are dropped.
//! Operators built from the same factorization then certify range inclusions
//! through an explicit residual instead of silently inverting noise.

use nalgebra::{DMatrix, DVector};

/// Relative floor (on the eigenvalues of `Q̄_t`, i.e. the squared singular
/// values of `Q̄_t^{1/2}`) below which a direction is treated as null.
///
/// The nominal policy drops singular values of `Q̄_t^{1/2}` below
/// `1e-12 · σ_max`, i.e. eigenvalues below `1e-24 · μ_max`; in f64 that is
/// unreachable, so the effective floor is the numerical-rank guard
/// `16 n ε · μ_max`.
pub fn eigenvalue_floor(n: usize, mu_max: f64) -> f64 {
    let rank_guard = 16.0 * n as f64 * f64::EPSILON;
    (1e-24_f64).max(rank_guard) * mu_max
}

/// Symmetric PSD square-root factor `M = U diag(μ) Uᵀ` with clamped spectrum.
#[derive(Debug, Clone)]
pub struct SymmetricRoot {
    /// Kept eigenvectors, one column per retained direction.
    pub vectors: DMatrix<f64>,
    /// Retained (clamped, positive) eigenvalues of `M`.
    pub eigenvalues: DVector<f64>,
    /// Ambient dimension.
    pub dim: usize,
    /// Largest eigenvalue before clamping (0 for the zero matrix).
    pub mu_max: f64,
}

impl SymmetricRoot {
    /// Factorizes a symmetric PSD matrix, clamping negatives to zero and
    /// dropping eigenvalues under the relative floor.
    pub fn new(mat: &DMatrix<f64>) -> Self {
        assert_eq!(mat.nrows(), mat.ncols(), "matrix must be square");
        let n = mat.nrows();
        // Symmetrize to guard against accumulation asymmetry.
        let sym = (mat + mat.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let mu_max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let floor = eigenvalue_floor(n, mu_max);
        let mut kept_vals = Vec::new();
        let mut kept_cols = Vec::new();
        for (i, &mu) in eig.eigenvalues.iter().enumerate() {
            if mu > floor {
                kept_vals.push(mu);
                kept_cols.push(eig.eigenvectors.column(i).clone_owned());
            }
        }
        let rank = kept_vals.len();
        let mut vectors = DMatrix::zeros(n, rank);
        for (j, col) in kept_cols.iter().enumerate() {
            vectors.set_column(j, col);
        }
        SymmetricRoot {
            vectors,
            eigenvalues: DVector::from_vec(kept_vals),
            dim: n,
            mu_max,
        }
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The symmetric square root `M^{1/2}` as a dense matrix.
    pub fn sqrt_matrix(&self) -> DMatrix<f64> {
        let scaled = scale_columns(&self.vectors, &self.eigenvalues.map(f64::sqrt));
        &scaled * self.vectors.transpose()
    }

    /// Applies the pseudo-inverse root `M^{-1/2}` (zero on dropped directions).
    pub fn apply_pinv_sqrt(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let coeffs = self.vectors.transpose() * rhs;
        let scaled = scale_rows(&coeffs, &self.eigenvalues.map(|m| 1.0 / m.sqrt()));
        &self.vectors * scaled
    }

    /// Applies `M^{1/2}`.
    pub fn apply_sqrt(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let coeffs = self.vectors.transpose() * rhs;
        let scaled = scale_rows(&coeffs, &self.eigenvalues.map(f64::sqrt));
        &self.vectors * scaled
    }

    /// `M^{-1/2} G` together with the reconstruction residual
    /// `‖M^{1/2}(M^{-1/2}G) − G‖₂`; a nonzero residual exposes components of
    /// `G` in the dropped directions.
    pub fn pinv_sqrt_with_residual(&self, g: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
        let lambda = self.apply_pinv_sqrt(g);
        let recon = self.apply_sqrt(&lambda);
        let residual = spectral_norm(&(recon - g));
        (lambda, residual)
    }
}

fn scale_columns(m: &DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, &f) in s.iter().enumerate() {
        out.column_mut(j).scale_mut(f);
    }
    out
}

fn scale_rows(m: &DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (i, &f) in s.iter().enumerate() {
        out.row_mut(i).scale_mut(f);
    }
    out
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    // Eigenvalues of the smaller Gram matrix; avoids SVD convergence corner
    // cases on strongly graded spectra.
    let gram = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    let eig = gram.symmetric_eigen();
    eig.eigenvalues
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max)
        .max(0.0)
        .sqrt()
}

/// Largest generalized eigenvalue of `A z = c B z` for symmetric `A` and
/// symmetric positive definite `B`, via the Cholesky reduction
/// `L⁻¹ A L⁻ᵀ`. Returns `None` when `B` has no Cholesky factor.
pub fn largest_generalized_eigenvalue(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<f64> {
    let chol = b.clone().cholesky()?;
    let l = chol.l();
    // C = L^{-1} A L^{-T}
    let mut work = a.clone();
    l.solve_lower_triangular_mut(&mut work);
    let mut work_t = work.transpose();
    l.solve_lower_triangular_mut(&mut work_t);
    let c = (work_t.transpose() + work_t) * 0.5;
    let eig = c.symmetric_eigen();
    Some(eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

/// Least-squares slope/intercept/R² of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(&u, &v)| (u - mx) * (v - my)).sum();
    let syy: f64 = y.iter().map(|&v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, intercept, r2)
}
