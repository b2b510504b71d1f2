//! Natural-gradient direction for the pullback of the `L²(ρ̂)` metric.

use nalgebra::{DMatrix, DVector};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::model::MapModel;

/// Tikhonov term added to the Gram matrix before solving.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularization {
    None,
    /// `μ = factor · trace(G) / m`.
    TraceScaled(f64),
}

pub const DEFAULT_REGULARIZATION: Regularization = Regularization::TraceScaled(1e-8);

/// Solves `(G + μI) δθ = (1/n) Σ_i J_iᵀ v_i` with `G = (1/n) Σ_i J_iᵀ J_i`.
pub fn natural_direction_from_jacobians(
    jacobians: &[DMatrix<f64>],
    field: &PointCloud,
    regularization: Regularization,
) -> Result<Vec<f64>> {
    let first = jacobians.first().ok_or(Error::TooFewPoints { needed: 1, found: 0 })?;
    let (d, m) = first.shape();
    if field.len() != jacobians.len() || field.dim() != d {
        return Err(Error::ShapeMismatch(format!(
            "{} jacobians of {d} rows vs field {}×{}",
            jacobians.len(),
            field.len(),
            field.dim()
        )));
    }
    let n = jacobians.len() as f64;
    let mut gram = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for (j, v) in jacobians.iter().zip(field.rows()) {
        if j.shape() != (d, m) {
            return Err(Error::ShapeMismatch("jacobians differ in shape".into()));
        }
        gram += j.transpose() * j;
        rhs += j.transpose() * DVector::from_column_slice(v);
    }
    gram /= n;
    rhs /= n;
    if let Regularization::TraceScaled(factor) = regularization {
        let mu = factor * gram.trace() / m as f64;
        for i in 0..m {
            gram[(i, i)] += mu;
        }
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("Gram matrix is not positive definite".into()))?;
    let sol = chol.solve(&rhs);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("natural direction is not finite".into()));
    }
    Ok(sol.as_slice().to_vec())
}

/// Natural-gradient direction of the field `v` at `θ`, i.e. the minimizer of
/// `(1/n) Σ_i ‖v_i − J_i δθ‖²` (regularized).
pub fn natural_direction_direct<M: MapModel + ?Sized>(
    model: &M,
    theta: &[f64],
    points: &PointCloud,
    field: &PointCloud,
) -> Result<Vec<f64>> {
    let jacs = model.param_jacobians(theta, points)?;
    natural_direction_from_jacobians(&jacs, field, DEFAULT_REGULARIZATION)
}
