//! Closed-form ground truths used to check the learned maps and the
//! derivative code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const EIGEN_FLOOR: f64 = 1e-12;

/// `x ↦ A x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl AffineMap {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let y = &self.matrix * DVector::from_column_slice(x) + &self.offset;
        y.as_slice().to_vec()
    }

    pub fn identity(d: usize) -> Self {
        Self { matrix: DMatrix::identity(d, d), offset: DVector::zeros(d) }
    }
}

fn check_spd(m: &DMatrix<f64>, what: &str) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if !m.is_square() {
        return Err(Error::NotSpd(format!("{what} is not square")));
    }
    let scale = m.abs().max().max(1.0);
    if (m - m.transpose()).abs().max() > 1e-12 * scale {
        return Err(Error::NotSpd(format!("{what} is not symmetric")));
    }
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > EIGEN_FLOOR)) {
        return Err(Error::NotSpd(format!("{what} has an eigenvalue below {EIGEN_FLOOR:e}")));
    }
    Ok(eig)
}

fn spectral_apply(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let q = &eig.eigenvectors;
    let diag = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    let out = q * diag * q.transpose();
    0.5 * (&out + out.transpose())
}

/// Symmetric square root of an SPD matrix.
pub fn sqrtm_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(spectral_apply(&check_spd(m, "matrix")?, f64::sqrt))
}

fn inv_sqrtm_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(spectral_apply(&check_spd(m, "matrix")?, |l| 1.0 / l.sqrt()))
}

fn check_mean(mean: &[f64], cov: &DMatrix<f64>) -> Result<()> {
    if mean.len() != cov.nrows() {
        return Err(Error::DimensionMismatch { expected: cov.nrows(), found: mean.len() });
    }
    Ok(())
}

/// Monge map between `N(μ₀, Σ₀)` and `N(μ₁, Σ₁)`:
/// `A = Σ₀^{−½}(Σ₀^{½} Σ₁ Σ₀^{½})^{½} Σ₀^{−½}`, `b = μ₁ − A μ₀`.
pub fn gaussian_ot_map(
    mean0: &[f64],
    cov0: &DMatrix<f64>,
    mean1: &[f64],
    cov1: &DMatrix<f64>,
) -> Result<AffineMap> {
    check_mean(mean0, cov0)?;
    check_mean(mean1, cov1)?;
    check_spd(cov1, "target covariance")?;
    let s0 = sqrtm_spd(cov0)?;
    let s0_inv = inv_sqrtm_spd(cov0)?;
    let middle = sqrtm_spd(&(&s0 * cov1 * &s0))?;
    let a = &s0_inv * middle * &s0_inv;
    let a = 0.5 * (&a + a.transpose());
    let offset = DVector::from_column_slice(mean1) - &a * DVector::from_column_slice(mean0);
    Ok(AffineMap { matrix: a, offset })
}

/// Closed-form `W₂` between Gaussians.
pub fn bures_w2(mean0: &[f64], cov0: &DMatrix<f64>, mean1: &[f64], cov1: &DMatrix<f64>) -> Result<f64> {
    check_mean(mean0, cov0)?;
    check_mean(mean1, cov1)?;
    check_spd(cov1, "covariance")?;
    let s0 = sqrtm_spd(cov0)?;
    let cross = sqrtm_spd(&(&s0 * cov1 * &s0))?;
    let mean_term: f64 = mean0.iter().zip(mean1).map(|(a, b)| (a - b) * (a - b)).sum();
    let w2sq = mean_term + (cov0 + cov1 - 2.0 * cross).trace();
    Ok(w2sq.max(0.0).sqrt())
}

/// `∇ log N(μ, Σ)(x) = −Σ⁻¹(x − μ)`.
pub fn gaussian_score(mean: &[f64], cov: &DMatrix<f64>, x: &[f64]) -> Result<Vec<f64>> {
    check_mean(mean, cov)?;
    check_spd(cov, "covariance")?;
    if x.len() != mean.len() {
        return Err(Error::DimensionMismatch { expected: mean.len(), found: x.len() });
    }
    let chol = cov.clone().cholesky().ok_or_else(|| Error::NotSpd("cholesky failed".into()))?;
    let r = DVector::from_iterator(x.len(), x.iter().zip(mean).map(|(a, b)| a - b));
    Ok(chol.solve(&r).iter().map(|v| -v).collect())
}

/// Monotone rearrangement between equal-size sorted samples, linearly
/// interpolated and held constant outside the source range.
pub fn ot_map_1d(src_sorted: &[f64], tgt_sorted: &[f64], query: f64) -> Result<f64> {
    if src_sorted.len() != tgt_sorted.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} source vs {} target samples",
            src_sorted.len(),
            tgt_sorted.len()
        )));
    }
    if src_sorted.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, found: 0 });
    }
    for (name, s) in [("source", src_sorted), ("target", tgt_sorted)] {
        if s.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::Unsorted(name.into()));
        }
    }
    let n = src_sorted.len();
    if query <= src_sorted[0] {
        return Ok(tgt_sorted[0]);
    }
    if query >= src_sorted[n - 1] {
        return Ok(tgt_sorted[n - 1]);
    }
    let hi = src_sorted.partition_point(|&v| v <= query);
    let lo = hi - 1;
    let (x0, x1) = (src_sorted[lo], src_sorted[hi]);
    let (y0, y1) = (tgt_sorted[lo], tgt_sorted[hi]);
    if x1 == x0 {
        return Ok(y0);
    }
    Ok(y0 + (y1 - y0) * (query - x0) / (x1 - x0))
}

/// Central differences `(f(θ + h e_k) − f(θ − h e_k)) / 2h`.
pub fn finite_diff_gradient<F>(f: F, theta: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(step > 0.0) {
        return Err(Error::InvalidConfig(format!("finite-difference step must be positive, got {step}")));
    }
    let mut probe = theta.to_vec();
    let mut out = Vec::with_capacity(theta.len());
    for k in 0..theta.len() {
        probe[k] = theta[k] + step;
        let up = f(&probe);
        probe[k] = theta[k] - step;
        let dn = f(&probe);
        probe[k] = theta[k];
        if !(up.is_finite() && dn.is_finite()) {
            return Err(Error::NonFinite(format!("objective near coordinate {k}")));
        }
        out.push((up - dn) / (2.0 * step));
    }
    Ok(out)
}
