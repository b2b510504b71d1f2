//! Symmetric entropic transport of a point cloud onto itself, and the score
//! estimate read off its potential.
//!
//! With cost `c(x, y) = ½‖x − y‖²` the self potential solves
//! `f_i = −ε log((1/n) Σ_j exp((f_j − c_ij)/ε))`. For small `ε`,
//! `f ≈ −(ε/2) log ρ`, so the gradient of its out-of-sample extension,
//! `x − b_ε(x)`, gives `∇ log ρ(x) ≈ (2/ε)(b_ε(x) − x)` where `b_ε` is the
//! barycentric projection of the conditional entropic plan.

use crate::cloud::{sq_dist, PointCloud};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornPotentials {
    pub points: PointCloud,
    pub f: Vec<f64>,
    pub epsilon: f64,
    pub iterations_used: usize,
    pub final_residual: f64,
}

/// Median of the `n(n−1)/2` pairwise squared distances.
pub fn median_sq_distance(points: &PointCloud) -> Result<f64> {
    let mut d = pairwise_sq_distances(points)?;
    let len = d.len();
    let mid = len / 2;
    let (lo, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if len % 2 == 1 {
        return Ok(upper);
    }
    let lower = lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(0.5 * (lower + upper))
}

pub fn mean_sq_distance(points: &PointCloud) -> Result<f64> {
    let d = pairwise_sq_distances(points)?;
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

fn pairwise_sq_distances(points: &PointCloud) -> Result<Vec<f64>> {
    let n = points.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, found: n });
    }
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(sq_dist(points.row(i), points.row(j)));
        }
    }
    Ok(out)
}

/// `fraction × median squared distance`, falling back to the mean when the
/// median vanishes.
pub fn select_epsilon(points: &PointCloud, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction.is_finite()) {
        return Err(Error::InvalidConfig(format!("epsilon fraction must be positive, got {fraction}")));
    }
    let mut scale = median_sq_distance(points)?;
    if scale <= 0.0 {
        scale = mean_sq_distance(points)?;
    }
    if scale <= 0.0 {
        return Err(Error::DegenerateCloud);
    }
    Ok(fraction * scale)
}

/// One application of the symmetric Sinkhorn map in log domain.
fn sinkhorn_map(half_cost_over_eps: &[f64], f: &[f64], epsilon: f64, out: &mut [f64]) {
    let n = f.len();
    let log_n = (n as f64).ln();
    let g: Vec<f64> = f.iter().map(|v| v / epsilon).collect();
    let mut buf = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let row = &half_cost_over_eps[i * n..(i + 1) * n];
        let mut mx = f64::NEG_INFINITY;
        for ((b, gj), cj) in buf.iter_mut().zip(&g).zip(row) {
            *b = gj - cj;
            mx = mx.max(*b);
        }
        let s: f64 = buf.iter().map(|b| (b - mx).exp()).sum();
        *o = -epsilon * (mx + s.ln() - log_n);
    }
}

/// Solves the symmetric fixed point by damped averaging `f ← ½(f + S(f))`.
pub fn sinkhorn_self(
    points: &PointCloud,
    epsilon: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SinkhornPotentials> {
    let n = points.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, found: n });
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
    }
    if !points.is_finite() {
        return Err(Error::NonFinite("sinkhorn support points".into()));
    }
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let c = 0.5 * sq_dist(points.row(i), points.row(j)) / epsilon;
            cost[i * n + j] = c;
            cost[j * n + i] = c;
        }
    }
    let mut f = vec![0.0; n];
    let mut mapped = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 0..=max_iter {
        sinkhorn_map(&cost, &f, epsilon, &mut mapped);
        residual = f.iter().zip(&mapped).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if !residual.is_finite() {
            break;
        }
        if residual <= tol {
            return Ok(SinkhornPotentials {
                points: points.clone(),
                f,
                epsilon,
                iterations_used: it,
                final_residual: residual,
            });
        }
        if it == max_iter {
            break;
        }
        for (a, b) in f.iter_mut().zip(&mapped) {
            *a = 0.5 * (*a + b);
        }
    }
    Err(Error::SinkhornNotConverged { iterations: max_iter, residual })
}

impl SinkhornPotentials {
    /// Conditional plan weights `w_j(x) ∝ exp((f_j − ½‖x − y_j‖²)/ε)`.
    pub fn barycentric_weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.points.dim() {
            return Err(Error::DimensionMismatch { expected: self.points.dim(), found: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("score query".into()));
        }
        let mut logits: Vec<f64> = self
            .points
            .rows()
            .zip(&self.f)
            .map(|(y, fj)| (fj - 0.5 * sq_dist(x, y)) / self.epsilon)
            .collect();
        let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for l in &mut logits {
            *l = (*l - mx).exp();
            total += *l;
        }
        for l in &mut logits {
            *l /= total;
        }
        Ok(logits)
    }

    /// `b_ε(x) = Σ_j w_j(x) y_j`.
    pub fn barycentric_projection(&self, x: &[f64]) -> Result<Vec<f64>> {
        let w = self.barycentric_weights(x)?;
        let mut b = vec![0.0; x.len()];
        for (wj, y) in w.iter().zip(self.points.rows()) {
            for (bk, yk) in b.iter_mut().zip(y) {
                *bk += wj * yk;
            }
        }
        Ok(b)
    }

    /// `ŝ(x) = (2/ε)(b_ε(x) − x)`.
    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        let b = self.barycentric_projection(x)?;
        let k = 2.0 / self.epsilon;
        Ok(b.iter().zip(x).map(|(bi, xi)| k * (bi - xi)).collect())
    }

    pub fn score_batch(&self, queries: &PointCloud) -> Result<PointCloud> {
        let mut out = PointCloud::zeros(queries.len(), queries.dim());
        for (q, o) in queries.rows().zip(out.rows_mut()) {
            o.copy_from_slice(&self.score(q)?);
        }
        Ok(out)
    }
}

/// Fits the self potential with `ε = fraction × median squared distance`
/// and evaluates the score at the support points.
pub fn score_at_support(
    points: &PointCloud,
    eps_fraction: f64,
    options: SinkhornOptions,
) -> Result<(SinkhornPotentials, PointCloud)> {
    let eps = select_epsilon(points, eps_fraction)?;
    let pot = sinkhorn_self(points, eps, options.tol, options.max_iter)?;
    let scores = pot.score_batch(points)?;
    Ok((pot, scores))
}
