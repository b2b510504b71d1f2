use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;

use super::*;
use crate::divergences::{PotentialEnergy, TargetPotential};
use crate::icnn::{Icnn, IcnnSpec};
use crate::model::LinearModel;
use crate::oracles::finite_diff_gradient;

fn grid_1d(n: usize, lo: f64, hi: f64) -> PointCloud {
    let data = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    PointCloud::new(1, data).unwrap()
}

fn lcg(seed: &mut u64) -> f64 {
    *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
}

fn energy(center: f64) -> PotentialEnergy {
    PotentialEnergy { target: TargetPotential::Isotropic { center: vec![center], precision: 1.0 } }
}

fn gd_inner(steps: usize, lr: f64) -> InnerSettings {
    InnerSettings { steps, optimizer: InnerOptimizer::Gd, lr, adam: AdamParams::default() }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-12)
}

#[test]
fn euclidean_step_is_stationary_for_zero_field() {
    let model = LinearModel::affine_1d();
    let flat = PotentialEnergy { target: TargetPotential::Flat };
    let x = grid_1d(10, -1.0, 1.0);
    let theta = vec![0.7, -0.2];
    let (next, diag) = euclidean_step(&model, &flat, &theta, &x, 0.5).unwrap();
    assert_eq!(next, theta);
    assert_eq!(diag.grad_norm, 0.0);
}

#[test]
fn euclidean_direction_matches_finite_differences() {
    let model = LinearModel::affine_1d();
    let functional = PotentialEnergy { target: TargetPotential::StandardGaussian };
    let x = grid_1d(15, -2.0, 3.0);
    let theta = vec![0.8, 0.4];
    let (grad, _, _) = euclidean_gradient(&model, &functional, &theta, &x).unwrap();
    let loss = |t: &[f64]| functional.value(&model.push_forward(t, &x).unwrap()).unwrap();
    let fd = finite_diff_gradient(loss, &theta, 1e-5).unwrap();
    assert!(rel_err(&grad, &fd) < 1e-4);
}

#[test]
fn euclidean_gradient_through_network_matches_finite_differences() {
    let net = Icnn::new(IcnnSpec::new(2, vec![6, 5])).unwrap();
    let theta = net.init_params(&mut RunRng::seed_from_u64(4));
    let functional = PotentialEnergy {
        target: TargetPotential::Isotropic { center: vec![0.5, -1.0], precision: 2.0 },
    };
    let x = PointCloud::from_rows(&[[0.3, -0.5], [1.2, 0.8], [-1.5, 0.1], [0.0, 2.0]]).unwrap();
    let (grad, _, _) = euclidean_gradient(&net, &functional, &theta, &x).unwrap();
    let loss = |t: &[f64]| functional.value(&net.push_forward(t, &x).unwrap()).unwrap();
    let fd = finite_diff_gradient(loss, &theta, 1e-5).unwrap();
    assert!(rel_err(&grad, &fd) < 1e-4, "{}", rel_err(&grad, &fd));
}

#[test]
fn small_euclidean_step_decreases_energy() {
    let net = Icnn::new(IcnnSpec::new(2, vec![8, 8])).unwrap();
    let theta = net.init_params(&mut RunRng::seed_from_u64(1));
    let functional = PotentialEnergy {
        target: TargetPotential::Isotropic { center: vec![2.0, 2.0], precision: 1.0 },
    };
    let x = PointCloud::from_rows(&[[0.3, -0.5], [1.2, 0.8], [-1.5, 0.1], [0.0, 2.0]]).unwrap();
    let before = functional.value(&net.push_forward(&theta, &x).unwrap()).unwrap();
    let (next, _) = euclidean_step(&net, &functional, &theta, &x, 1e-3).unwrap();
    let after = functional.value(&net.push_forward(&next, &x).unwrap()).unwrap();
    assert!(after < before);
}

#[test]
fn explicit_step_with_zero_field_stays_put() {
    let model = LinearModel::affine_1d();
    let flat = PotentialEnergy { target: TargetPotential::Flat };
    let x = grid_1d(8, -1.0, 1.0);
    let theta = vec![1.3, 0.1];
    let (next, diag) = explicit_constrained_step(&model, &flat, &theta, &x, 0.4, &InnerSettings::default()).unwrap();
    assert_eq!(next, theta);
    assert_eq!(diag.surrogate_loss, 0.0);
}

fn normal_equations_step(model: &LinearModel, x: &PointCloud, v: &PointCloud, tau: f64) -> DVector<f64> {
    let m = model.param_count();
    let mut a = DMatrix::zeros(m, m);
    let mut b = DVector::zeros(m);
    for (xi, vi) in x.rows().zip(v.rows()) {
        let f = model.features(xi);
        a += f.transpose() * &f;
        b += f.transpose() * DVector::from_column_slice(vi);
    }
    tau * a.lu().solve(&b).unwrap()
}

#[test]
fn explicit_inner_solve_matches_normal_equations() {
    let model = LinearModel::affine_1d();
    let x = grid_1d(20, -1.0, 1.0);
    let v = PointCloud::new(1, x.as_slice().iter().map(|t| 0.5 - 2.0 * t + 0.3 * t * t).collect()).unwrap();
    let theta_k = vec![0.9, -0.3];
    let tau = 1.0;
    let sol = explicit_inner_solve(&model, &theta_k, &x, &v, tau, &gd_inner(5000, 0.4)).unwrap();
    let step = normal_equations_step(&model, &x, &v, tau);
    for i in 0..2 {
        assert!((sol.theta[i] - theta_k[i] - step[i]).abs() < 1e-6);
    }
    // best-so-far objective is nonincreasing and ends at the returned value
    let mut best = f64::INFINITY;
    for &o in &sol.trace {
        best = best.min(o);
    }
    assert_eq!(best, sol.objective);
}

#[test]
fn explicit_inner_solution_is_a_natural_gradient_step() {
    let mut s = 17;
    let model = LinearModel::polynomial_1d(3);
    let n = 25;
    let x = grid_1d(n, -1.5, 1.5);
    let v = PointCloud::new(1, (0..n).map(|_| lcg(&mut s)).collect()).unwrap();
    let theta_k: Vec<f64> = (0..4).map(|_| lcg(&mut s)).collect();
    let tau = 0.4;
    let dir = natural_direction_direct(&model, &theta_k, &x, &v).unwrap();
    let sol = explicit_inner_solve(&model, &theta_k, &x, &v, tau, &gd_inner(50_000, 5e-3)).unwrap();
    for ((a, t), d) in sol.theta.iter().zip(&theta_k).zip(&dir) {
        assert!((a - (t + tau * d)).abs() < 1e-4, "{a} vs {}", t + tau * d);
    }
}

#[test]
fn implicit_step_with_tiny_tau_keeps_theta() {
    let model = LinearModel::affine_1d();
    let x = grid_1d(10, -1.0, 1.0);
    let theta = vec![0.5, 0.5];
    let (next, _) =
        implicit_constrained_step(&model, &energy(0.0), &theta, || x.clone(), 1e-9, &InnerSettings::default())
            .unwrap();
    assert_eq!(next, theta);
}

#[test]
fn implicit_step_matches_closed_form_prox() {
    let model = LinearModel::affine_1d();
    let x = grid_1d(30, -1.0, 2.0);
    let center = 1.5;
    let tau = 0.4;
    let theta_k = vec![0.3, -0.7];
    let (next, diag) =
        implicit_constrained_step(&model, &energy(center), &theta_k, || x.clone(), tau, &gd_inner(20_000, 0.2))
            .unwrap();
    // (G + G/τ) θ = (1/n) Σ F_iᵀ c + G θ_k / τ
    let mut g = DMatrix::zeros(2, 2);
    let mut r = DVector::zeros(2);
    for xi in x.rows() {
        let f = model.features(xi);
        g += f.transpose() * &f;
        r += f.transpose() * DVector::from_element(1, center);
    }
    let n = x.len() as f64;
    g /= n;
    r /= n;
    let lhs = &g * (1.0 + 1.0 / tau);
    let rhs = r + &g * DVector::from_column_slice(&theta_k) / tau;
    let exact = lhs.lu().solve(&rhs).unwrap();
    for i in 0..2 {
        assert!((next[i] - exact[i]).abs() < 1e-6, "{} vs {}", next[i], exact[i]);
    }

    // δ_k recomputed from its definition
    let before = model.push_forward(&theta_k, &x).unwrap();
    let after = model.push_forward(&next, &x).unwrap();
    let diff = after.axpy(-1.0, &before).unwrap();
    let field = energy(center).grad_field(&after).unwrap().vectors;
    let res = field.axpy(0.5 / tau, &diff).unwrap().rms_norm();
    let delta = tau * res / diff.rms_norm();
    assert!((diag.inexactness_delta.unwrap() - delta).abs() < 1e-12);
}

fn stacked_qr_oracle(jacs: &[DMatrix<f64>], v: &PointCloud) -> DVector<f64> {
    let (d, m) = jacs[0].shape();
    let n = jacs.len();
    let mut a = DMatrix::zeros(n * d, m);
    let mut b = DVector::zeros(n * d);
    for (i, (j, vi)) in jacs.iter().zip(v.rows()).enumerate() {
        a.view_mut((i * d, 0), (d, m)).copy_from(j);
        for k in 0..d {
            b[i * d + k] = vi[k];
        }
    }
    let qr = a.qr();
    let qtb = qr.q().transpose() * b;
    qr.r().solve_upper_triangular(&qtb).unwrap()
}

#[test]
fn direct_solve_matches_stacked_least_squares() {
    let mut s = 99;
    for (d, m, n) in [(1, 5, 12), (2, 8, 10), (3, 20, 15), (2, 50, 40)] {
        let jacs: Vec<DMatrix<f64>> = (0..n).map(|_| DMatrix::from_fn(d, m, |_, _| lcg(&mut s))).collect();
        let v = PointCloud::new(d, (0..n * d).map(|_| lcg(&mut s)).collect()).unwrap();
        let direct = natural_direction_from_jacobians(&jacs, &v, DEFAULT_REGULARIZATION).unwrap();
        let oracle = stacked_qr_oracle(&jacs, &v);
        assert!(rel_err(&direct, oracle.as_slice()) < 1e-6, "d={d} m={m}");
    }
}

#[test]
fn natural_direction_is_reparameterization_invariant() {
    let mut s = 5;
    let (d, m, n) = (2, 6, 10);
    let jacs: Vec<DMatrix<f64>> = (0..n).map(|_| DMatrix::from_fn(d, m, |_, _| lcg(&mut s))).collect();
    let v = PointCloud::new(d, (0..n * d).map(|_| lcg(&mut s)).collect()).unwrap();
    // θ = A θ' so J' = J A
    let a = DMatrix::from_fn(m, m, |i, j| if i == j { 2.0 } else { 0.3 * lcg(&mut s) });
    let jacs2: Vec<DMatrix<f64>> = jacs.iter().map(|j| j * &a).collect();
    let d1 = DVector::from_vec(natural_direction_from_jacobians(&jacs, &v, Regularization::None).unwrap());
    let d2 = DVector::from_vec(natural_direction_from_jacobians(&jacs2, &v, Regularization::None).unwrap());
    for (j, j2) in jacs.iter().zip(&jacs2) {
        let t1 = j * &d1;
        let t2 = j2 * &d2;
        assert!((t1 - t2).abs().max() < 1e-6);
    }
}

#[test]
fn run_scheme_with_no_steps_returns_start() {
    let model = LinearModel::affine_1d();
    let cfg = SchemeConfig::new(SchemeKind::Euclidean, 0.1, 0);
    let theta0 = vec![1.0, 2.0];
    let run = run_scheme(
        &model,
        &energy(0.0),
        &cfg,
        &theta0,
        &FixedCloud(grid_1d(5, 0.0, 1.0)),
        &mut RunRng::seed_from_u64(0),
    )
    .unwrap();
    assert_eq!(run.theta_final, theta0);
    assert!(run.diagnostics.is_empty());
    assert_eq!(run.termination, Termination::Completed);
}

struct UniformSampler;

impl Sampler for UniformSampler {
    fn dim(&self) -> usize {
        1
    }
    fn sample(&self, n: usize, rng: &mut RunRng) -> PointCloud {
        use rand::Rng;
        PointCloud::new(1, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }
}

#[test]
fn run_scheme_is_deterministic() {
    let model = LinearModel::affine_1d();
    for kind in [
        SchemeKind::Euclidean,
        SchemeKind::Adam,
        SchemeKind::ExplicitConstrained,
        SchemeKind::ImplicitConstrained,
    ] {
        let cfg = SchemeConfig::new(kind, 0.1, 4).with_inner(5).with_batch(16);
        let go = || {
            run_scheme(&model, &energy(1.0), &cfg, &[0.2, 0.2], &UniformSampler, &mut RunRng::seed_from_u64(3))
                .unwrap()
        };
        let (a, b) = (go(), go());
        assert_eq!(a.theta_final, b.theta_final);
        assert_eq!(a.diagnostics, b.diagnostics);
        assert_eq!(a.diagnostics.len(), 4);
    }
}

#[test]
fn divergence_aborts_with_last_good_iterate() {
    let model = LinearModel::affine_1d();
    let cfg = SchemeConfig::new(SchemeKind::Euclidean, 50.0, 20);
    let run = run_scheme(&model, &energy(0.0), &cfg, &[1.0, 1.0], &UniformSampler, &mut RunRng::seed_from_u64(0))
        .unwrap();
    assert!(matches!(run.termination, Termination::Aborted { .. }));
    assert!(run.theta_final.iter().all(|v| v.is_finite()));
    assert!(run.diagnostics.len() < 20);
}

#[test]
fn invalid_config_rejected() {
    let model = LinearModel::affine_1d();
    let cfg = SchemeConfig::new(SchemeKind::Euclidean, -1.0, 3);
    let r = run_scheme(&model, &energy(0.0), &cfg, &[1.0, 1.0], &UniformSampler, &mut RunRng::seed_from_u64(0));
    assert!(matches!(r, Err(Error::InvalidConfig(_))));
}
