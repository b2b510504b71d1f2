//! Parameterized maps `θ ↦ T_θ` consumed by the descent schemes.

use nalgebra::DMatrix;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// A differentiable family of maps `T_θ : R^d → R^d` with `θ ∈ R^m`.
///
/// The schemes only ever need the pushed points and vector-Jacobian
/// products `Σ_i J_iᵀ c_i` with `J_i = ∇_θ T_θ(x_i)`.
pub trait MapModel: Sync {
    fn input_dim(&self) -> usize;

    fn param_count(&self) -> usize;

    /// `T_θ(x_i)` for every row of `points`.
    fn push_forward(&self, theta: &[f64], points: &PointCloud) -> Result<PointCloud>;

    /// `∇_θ [(1/n) Σ_i ⟨c_i, T_θ(x_i)⟩] = (1/n) Σ_i J_iᵀ c_i`.
    fn loss_param_gradient(
        &self,
        theta: &[f64],
        points: &PointCloud,
        cotangents: &PointCloud,
    ) -> Result<Vec<f64>>;

    /// Stacked `d × m` parameter Jacobians, one per point.
    ///
    /// The default assembles each row from a unit-cotangent product.
    fn param_jacobians(&self, theta: &[f64], points: &PointCloud) -> Result<Vec<DMatrix<f64>>> {
        let d = self.input_dim();
        let m = self.param_count();
        let mut out = Vec::with_capacity(points.len());
        for x in points.rows() {
            let single = PointCloud::new(d, x.to_vec())?;
            let mut jac = DMatrix::zeros(d, m);
            for k in 0..d {
                let mut e = vec![0.0; d];
                e[k] = 1.0;
                let row = self.loss_param_gradient(theta, &single, &PointCloud::new(d, e)?)?;
                for (j, v) in row.into_iter().enumerate() {
                    jac[(k, j)] = v;
                }
            }
            out.push(jac);
        }
        Ok(out)
    }

    fn check_params(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                found: theta.len(),
            });
        }
        Ok(())
    }

    fn check_points(&self, points: &PointCloud) -> Result<()> {
        if points.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), found: points.dim() });
        }
        if points.is_empty() {
            return Err(Error::TooFewPoints { needed: 1, found: 0 });
        }
        Ok(())
    }
}

type FeatureFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// A map linear in its parameters, `T_θ(x) = F(x) θ` with a `d × m` feature
/// matrix `F(x)`. Used as a tractable stand-in for the network when checking
/// the schemes against closed-form solutions.
pub struct LinearModel {
    dim: usize,
    params: usize,
    features: Box<FeatureFn>,
}

impl LinearModel {
    pub fn new<F>(dim: usize, params: usize, features: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self { dim, params, features: Box::new(features) }
    }

    /// `T_θ(x) = θ₀ x + θ₁` on the real line.
    pub fn affine_1d() -> Self {
        Self::new(1, 2, |x| DMatrix::from_row_slice(1, 2, &[x[0], 1.0]))
    }

    /// `T_θ(x) = Σ_k θ_k x^k` for `k = 0..=degree` on the real line.
    pub fn polynomial_1d(degree: usize) -> Self {
        Self::new(1, degree + 1, move |x| {
            DMatrix::from_fn(1, degree + 1, |_, k| x[0].powi(k as i32))
        })
    }

    /// Random tanh features: `F(x)[r, k] = tanh(⟨w_rk, x⟩ + b_rk)`.
    pub fn random_features(dim: usize, params: usize, weights: Vec<f64>, biases: Vec<f64>) -> Self {
        assert_eq!(weights.len(), dim * params * dim);
        assert_eq!(biases.len(), dim * params);
        Self::new(dim, params, move |x| {
            DMatrix::from_fn(dim, params, |r, k| {
                let idx = r * params + k;
                let w = &weights[idx * dim..(idx + 1) * dim];
                let s: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
                (s + biases[idx]).tanh()
            })
        })
    }

    pub fn features(&self, x: &[f64]) -> DMatrix<f64> {
        (self.features)(x)
    }
}

impl MapModel for LinearModel {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn param_count(&self) -> usize {
        self.params
    }

    fn push_forward(&self, theta: &[f64], points: &PointCloud) -> Result<PointCloud> {
        self.check_params(theta)?;
        self.check_points(points)?;
        let th = nalgebra::DVector::from_column_slice(theta);
        let mut out = PointCloud::zeros(points.len(), self.dim);
        for (x, y) in points.rows().zip(out.rows_mut()) {
            let t = self.features(x) * &th;
            y.copy_from_slice(t.as_slice());
        }
        Ok(out)
    }

    fn loss_param_gradient(
        &self,
        theta: &[f64],
        points: &PointCloud,
        cotangents: &PointCloud,
    ) -> Result<Vec<f64>> {
        self.check_params(theta)?;
        self.check_points(points)?;
        points.check_same_shape(cotangents)?;
        let mut grad = nalgebra::DVector::zeros(self.params);
        for (x, c) in points.rows().zip(cotangents.rows()) {
            let f = self.features(x);
            grad += f.transpose() * nalgebra::DVector::from_column_slice(c);
        }
        grad /= points.len() as f64;
        Ok(grad.as_slice().to_vec())
    }

    fn param_jacobians(&self, theta: &[f64], points: &PointCloud) -> Result<Vec<DMatrix<f64>>> {
        self.check_params(theta)?;
        self.check_points(points)?;
        Ok(points.rows().map(|x| self.features(x)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_model_pushes_points() {
        let m = LinearModel::affine_1d();
        let x = PointCloud::new(1, vec![0.0, 1.0, 2.0]).unwrap();
        let y = m.push_forward(&[2.0, -1.0], &x).unwrap();
        assert_eq!(y.as_slice(), &[-1.0, 1.0, 3.0]);
    }

    #[test]
    fn default_jacobians_match_features() {
        struct Wrapped(LinearModel);
        impl MapModel for Wrapped {
            fn input_dim(&self) -> usize {
                self.0.input_dim()
            }
            fn param_count(&self) -> usize {
                self.0.param_count()
            }
            fn push_forward(&self, t: &[f64], p: &PointCloud) -> Result<PointCloud> {
                self.0.push_forward(t, p)
            }
            fn loss_param_gradient(&self, t: &[f64], p: &PointCloud, c: &PointCloud) -> Result<Vec<f64>> {
                self.0.loss_param_gradient(t, p, c)
            }
        }
        let m = Wrapped(LinearModel::polynomial_1d(3));
        let x = PointCloud::new(1, vec![0.5, -2.0]).unwrap();
        let jac = m.param_jacobians(&[0.0; 4], &x).unwrap();
        for (j, xi) in jac.iter().zip(x.rows()) {
            assert!((j - m.0.features(xi)).abs().max() < 1e-15);
        }
    }

    #[test]
    fn wrong_param_length_rejected() {
        let m = LinearModel::affine_1d();
        let x = PointCloud::new(1, vec![0.0]).unwrap();
        assert!(matches!(
            m.push_forward(&[1.0], &x),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }
}
