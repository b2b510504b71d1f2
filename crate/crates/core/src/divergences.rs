//! Functionals on pushed clouds: the relative entropy to a log-concave
//! target, potential energies, and the energy-distance MMD used to score
//! learned maps.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cloud::{sq_dist, PointCloud};
use crate::error::{Error, Result};
use crate::sinkhorn::{score_at_support, SinkhornOptions};

/// Potential `V` of a target `γ ∝ exp(−V)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetPotential {
    /// `V(x) = ‖x‖²/2`.
    StandardGaussian,
    /// `V(x) = (precision/2)‖x − center‖²`.
    Isotropic { center: Vec<f64>, precision: f64 },
    /// `V ≡ 0`. Improper; only useful to isolate the score term.
    Flat,
}

impl TargetPotential {
    pub fn label(&self) -> String {
        match self {
            TargetPotential::StandardGaussian => "standard_gaussian".into(),
            TargetPotential::Isotropic { precision, .. } => format!("isotropic(precision={precision})"),
            TargetPotential::Flat => "flat".into(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            TargetPotential::StandardGaussian => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            TargetPotential::Isotropic { center, precision } => 0.5 * precision * sq_dist(x, center),
            TargetPotential::Flat => 0.0,
        }
    }

    pub fn grad_v(&self, x: &[f64], out: &mut [f64]) {
        match self {
            TargetPotential::StandardGaussian => out.copy_from_slice(x),
            TargetPotential::Isotropic { center, precision } => {
                for ((o, xi), ci) in out.iter_mut().zip(x).zip(center) {
                    *o = precision * (xi - ci);
                }
            }
            TargetPotential::Flat => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    fn grad_field(&self, pushed: &PointCloud) -> PointCloud {
        let mut g = PointCloud::zeros(pushed.len(), pushed.dim());
        for (y, o) in pushed.rows().zip(g.rows_mut()) {
            self.grad_v(y, o);
        }
        g
    }
}

/// Wasserstein gradient of a functional evaluated at the pushed points.
#[derive(Debug, Clone)]
pub struct GradField {
    pub vectors: PointCloud,
    pub pushed_points: PointCloud,
}

impl GradField {
    /// Descent field `v_i = −g_i`.
    pub fn descent(&self) -> PointCloud {
        self.vectors.scaled(-1.0)
    }
}

/// A functional `D(ρ)` accessed through its Wasserstein gradient on samples.
pub trait Functional: Sync {
    fn grad_field(&self, pushed: &PointCloud) -> Result<GradField>;

    /// Empirical value `D(ρ̂)` when it is computable from samples.
    fn value(&self, pushed: &PointCloud) -> Option<f64>;
}

/// `H(ρ | γ)` with `∇_W H = ∇ log ρ + ∇V`; the score is re-estimated from
/// the cloud on every call.
#[derive(Debug, Clone)]
pub struct RelativeEntropy {
    pub target: TargetPotential,
    pub eps_rule: f64,
    pub sinkhorn: SinkhornOptions,
}

impl RelativeEntropy {
    pub fn new(target: TargetPotential, eps_rule: f64) -> Self {
        Self { target, eps_rule, sinkhorn: SinkhornOptions::default() }
    }
}

impl Functional for RelativeEntropy {
    fn grad_field(&self, pushed: &PointCloud) -> Result<GradField> {
        entropy_grad_field_with(pushed, &self.target, self.eps_rule, self.sinkhorn)
    }

    fn value(&self, _pushed: &PointCloud) -> Option<f64> {
        None
    }
}

/// `D(ρ) = ∫ V dρ`.
#[derive(Debug, Clone)]
pub struct PotentialEnergy {
    pub target: TargetPotential,
}

impl Functional for PotentialEnergy {
    fn grad_field(&self, pushed: &PointCloud) -> Result<GradField> {
        potential_energy_grad_field(pushed, &self.target)
    }

    fn value(&self, pushed: &PointCloud) -> Option<f64> {
        let n = pushed.len().max(1) as f64;
        Some(pushed.rows().map(|y| self.target.value(y)).sum::<f64>() / n)
    }
}

pub fn entropy_grad_field(
    pushed: &PointCloud,
    target: &TargetPotential,
    eps_rule: f64,
) -> Result<GradField> {
    entropy_grad_field_with(pushed, target, eps_rule, SinkhornOptions::default())
}

pub fn entropy_grad_field_with(
    pushed: &PointCloud,
    target: &TargetPotential,
    eps_rule: f64,
    options: SinkhornOptions,
) -> Result<GradField> {
    if !pushed.is_finite() {
        return Err(Error::NonFinite("pushed points".into()));
    }
    let (_, scores) = score_at_support(pushed, eps_rule, options)?;
    let drift = target.grad_field(pushed);
    Ok(GradField { vectors: scores.axpy(1.0, &drift)?, pushed_points: pushed.clone() })
}

pub fn potential_energy_grad_field(pushed: &PointCloud, target: &TargetPotential) -> Result<GradField> {
    if let TargetPotential::Isotropic { center, .. } = target {
        if center.len() != pushed.dim() {
            return Err(Error::DimensionMismatch { expected: center.len(), found: pushed.dim() });
        }
    }
    Ok(GradField { vectors: target.grad_field(pushed), pushed_points: pushed.clone() })
}

/// `Σ_i Σ_j ‖x_i − y_j‖` in a fixed order. Within-cloud sums go through the
/// same loop so that `mmd_energy(X, X)` cancels exactly.
fn distance_sum(x: &PointCloud, y: &PointCloud) -> f64 {
    let mut total = 0.0;
    for xi in x.rows() {
        total += y.rows().map(|yj| sq_dist(xi, yj).sqrt()).sum::<f64>();
    }
    total
}

/// Energy-distance MMD (V-statistic) with kernel `k(x, y) = −‖x − y‖`:
/// `½ [ mean k(X,X) + mean k(Y,Y) − 2 mean k(X,Y) ]`.
pub fn mmd_energy(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, found: 0 });
    }
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: y.dim() });
    }
    let (n, p) = (x.len() as f64, y.len() as f64);
    let kxx = -distance_sum(x, x) / (n * n);
    let kyy = -distance_sum(y, y) / (p * p);
    let kxy = -distance_sum(x, y) / (n * p);
    Ok(0.5 * (kxx + kyy - 2.0 * kxy))
}

/// `H(N(mean, cov) | N(0, I)) = ½(tr Σ + ‖μ‖² − d − log det Σ)`.
pub fn relative_entropy_gaussian(mean: &[f64], cov: &DMatrix<f64>) -> Result<f64> {
    let d = mean.len();
    if cov.nrows() != d || cov.ncols() != d {
        return Err(Error::ShapeMismatch(format!("covariance is {}×{}, mean has {d}", cov.nrows(), cov.ncols())));
    }
    if (cov - cov.transpose()).abs().max() > 1e-12 * cov.abs().max().max(1.0) {
        return Err(Error::NotSpd("covariance is not symmetric".into()));
    }
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd("cholesky factorization failed".into()))?;
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let mean_sq: f64 = mean.iter().map(|v| v * v).sum();
    Ok(0.5 * (cov.trace() + mean_sq - d as f64 - log_det))
}
