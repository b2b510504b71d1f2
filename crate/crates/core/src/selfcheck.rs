//! Fast oracle and invariant battery behind `otflow check`.
//!
//! Each check is self-contained and seeded, so a failure is reproducible.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cloud::PointCloud;
use crate::divergences::mmd_energy;
use crate::icnn::{Icnn, IcnnSpec};
use crate::model::{LinearModel, MapModel};
use crate::oracles::{finite_diff_gradient, gaussian_ot_map};
use crate::rng::{substream, RunRng};
use crate::schemes::{natural_direction_from_jacobians, Regularization};
use crate::sinkhorn::{select_epsilon, sinkhorn_self, SinkhornOptions};

pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn normal_vec(rng: &mut RunRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    }).collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-8)
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn run(name: &'static str, f: impl FnOnce() -> crate::Result<(bool, String)>) -> CheckResult {
    match f() {
        Ok((passed, detail)) => outcome(name, passed, detail),
        Err(e) => outcome(name, false, format!("error: {e}")),
    }
}

pub fn run_all() -> Vec<CheckResult> {
    vec![
        run("input gradient matches finite differences", input_gradient),
        run("parameter gradient matches finite differences", parameter_gradient),
        run("potential is midpoint convex", convexity),
        run("transport map is monotone", monotonicity),
        run("energy distance closed forms", mmd_closed_forms),
        run("entropic score matches smoothed Gaussian", score_oracle),
        run("Gaussian OT map pushes covariance forward", gaussian_map),
        run("natural direction solves least squares", natural_lstsq),
    ]
}

fn default_net() -> crate::Result<Icnn> {
    Icnn::new(IcnnSpec::new(2, vec![20, 20]))
}

fn input_gradient() -> crate::Result<(bool, String)> {
    let net = default_net()?;
    let mut rng = substream(11, "selfcheck/input-gradient");
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let theta = net.init_params(&mut rng);
        let x = normal_vec(&mut rng, 2, 1.5);
        let analytic = net.transport(&theta, &x)?;
        let fd = finite_diff_gradient(|p| net.potential(&theta, p).unwrap_or(f64::NAN), &x, 1e-5)?;
        worst = worst.max(rel_err(&fd, &analytic));
    }
    Ok((worst <= 1e-4, format!("worst relative error {worst:.2e}")))
}

fn parameter_gradient() -> crate::Result<(bool, String)> {
    let net = default_net()?;
    let mut rng = substream(12, "selfcheck/param-gradient");
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let theta = net.init_params(&mut rng);
        let x = PointCloud::new(2, normal_vec(&mut rng, 16, 1.5))?;
        let c = PointCloud::new(2, normal_vec(&mut rng, 16, 1.0))?;
        let analytic = net.loss_param_gradient(&theta, &x, &c)?;
        let surrogate = |t: &[f64]| -> f64 {
            let Ok(y) = net.push_forward(t, &x) else { return f64::NAN };
            let s: f64 = y.as_slice().iter().zip(c.as_slice()).map(|(a, b)| a * b).sum();
            s / x.len() as f64
        };
        let fd = finite_diff_gradient(surrogate, &theta, 1e-6)?;
        worst = worst.max(rel_err(&fd, &analytic));
    }
    Ok((worst <= 1e-4, format!("worst relative error {worst:.2e}")))
}

fn convexity() -> crate::Result<(bool, String)> {
    let net = default_net()?;
    let mut rng = substream(13, "selfcheck/convexity");
    let mut worst = f64::NEG_INFINITY;
    let mut theta = net.init_params(&mut rng);
    for trial in 0..1000 {
        if trial % 50 == 0 {
            theta = net.init_params(&mut rng);
        }
        let x = normal_vec(&mut rng, 2, 2.0);
        let y = normal_vec(&mut rng, 2, 2.0);
        for t in [0.25, 0.5, 0.75] {
            let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
            let gap = net.potential(&theta, &mid)?
                - t * net.potential(&theta, &x)?
                - (1.0 - t) * net.potential(&theta, &y)?;
            worst = worst.max(gap);
        }
    }
    Ok((worst <= 1e-10, format!("largest convexity gap {worst:.2e}")))
}

fn monotonicity() -> crate::Result<(bool, String)> {
    let net = default_net()?;
    let mut rng = substream(14, "selfcheck/monotone");
    let mut worst = f64::INFINITY;
    let mut theta = net.init_params(&mut rng);
    for trial in 0..1000 {
        if trial % 50 == 0 {
            theta = net.init_params(&mut rng);
        }
        let x = normal_vec(&mut rng, 2, 2.0);
        let y = normal_vec(&mut rng, 2, 2.0);
        let (tx, ty) = (net.transport(&theta, &x)?, net.transport(&theta, &y)?);
        let inner: f64 = (0..2).map(|i| (tx[i] - ty[i]) * (x[i] - y[i])).sum();
        worst = worst.min(inner);
    }
    Ok((worst >= -1e-10, format!("smallest inner product {worst:.2e}")))
}

fn mmd_closed_forms() -> crate::Result<(bool, String)> {
    let a = PointCloud::from_rows(&[vec![0.0, 0.0]])?;
    let b = PointCloud::from_rows(&[vec![3.0, 4.0]])?;
    let two_point = mmd_energy(&a, &b)?;
    let mut rng = substream(15, "selfcheck/mmd");
    let x = PointCloud::new(2, normal_vec(&mut rng, 400, 1.0))?;
    let null = mmd_energy(&x, &x)?;
    Ok((two_point == 5.0 && null == 0.0, format!("two-point {two_point}, self {null}")))
}

fn score_oracle() -> crate::Result<(bool, String)> {
    // Pointwise errors are variance dominated at this size, so the check
    // fits the radial slope ⟨ŝ(x), x⟩ / ‖x‖² over many queries instead.
    let mut rng = substream(16, "selfcheck/score");
    let pts = PointCloud::new(2, normal_vec(&mut rng, 1000, 1.0))?;
    let eps = select_epsilon(&pts, 0.05)?;
    let opts = SinkhornOptions::default();
    let pot = sinkhorn_self(&pts, eps, opts.tol, opts.max_iter)?;
    let (mut num, mut den) = (0.0, 0.0);
    for _ in 0..200 {
        let r = 2.0 * rng.random::<f64>().sqrt();
        let a = std::f64::consts::TAU * rng.random::<f64>();
        let q = [r * a.cos(), r * a.sin()];
        let est = pot.score(&q)?;
        num += est[0] * q[0] + est[1] * q[1];
        den += r * r;
    }
    let slope = num / den;
    let exact = -1.0 / (1.0 + eps / 2.0);
    let rel = (slope / exact - 1.0).abs();
    Ok((rel <= 0.1, format!("radial slope {slope:.3} vs {exact:.3}")))
}

fn gaussian_map() -> crate::Result<(bool, String)> {
    let c0 = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    let c1 = DMatrix::from_row_slice(2, 2, &[1.0, -0.3, -0.3, 0.5]);
    let map = gaussian_ot_map(&[1.0, 0.0], &c0, &[0.0, 2.0], &c1)?;
    let pushed = &map.matrix * &c0 * map.matrix.transpose();
    let err = (&pushed - &c1).norm();
    let asym = (&map.matrix - map.matrix.transpose()).norm();
    Ok((err <= 1e-10 && asym <= 1e-10, format!("covariance error {err:.1e}, asymmetry {asym:.1e}")))
}

fn natural_lstsq() -> crate::Result<(bool, String)> {
    let model = LinearModel::polynomial_1d(4);
    let mut rng = substream(17, "selfcheck/natural");
    let n = 30;
    let x = PointCloud::new(1, normal_vec(&mut rng, n, 1.0))?;
    let field = PointCloud::new(1, normal_vec(&mut rng, n, 1.0))?;
    let theta = normal_vec(&mut rng, model.param_count(), 1.0);
    let jacs = model.param_jacobians(&theta, &x)?;
    let dir = natural_direction_from_jacobians(&jacs, &field, Regularization::None)?;
    // stacked oracle: minimize Σ‖J_i δ − v_i‖²
    let m = model.param_count();
    let mut a = DMatrix::zeros(n, m);
    for (i, j) in jacs.iter().enumerate() {
        a.set_row(i, &j.row(0));
    }
    let b = DVector::from_column_slice(field.as_slice());
    let oracle = a.svd(true, true).solve(&b, 1e-14).map_err(|e| crate::Error::Singular(e.into()))?;
    let err = rel_err(&dir, oracle.as_slice());
    Ok((err <= 1e-6, format!("relative difference {err:.2e}")))
}
