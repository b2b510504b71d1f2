//! Descent schemes on the parameter space.
//!
//! * [`euclidean_step`]: plain gradient descent on `θ ↦ D(T_θ∗ρ₀)`.
//! * [`AdamState`]: Adam on the same gradient.
//! * [`explicit_constrained_step`]: fit `T_θ` so that `(T_θ − T_θk)/τ`
//!   matches the descent field `−∇_W D` frozen at `θ_k`.
//! * [`implicit_constrained_step`]: proximal step
//!   `D(T_θ∗ρ₀) + (1/2τ)‖T_θ − T_θk‖²_{L²(ρ₀)}`.
//!
//! The constrained subproblems are solved approximately by a fixed number of
//! inner optimizer steps and return their best iterate.

mod adam;
mod natural;

pub use adam::{adam_step, AdamParams, AdamState};
pub use natural::{
    natural_direction_direct, natural_direction_from_jacobians, Regularization,
    DEFAULT_REGULARIZATION,
};

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::divergences::Functional;
use crate::error::{Error, Result};
use crate::model::MapModel;
use crate::rng::RunRng;

/// Outer loop aborts once the surrogate exceeds this value.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

pub const DEFAULT_BATCH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Euclidean,
    Adam,
    ExplicitConstrained,
    ImplicitConstrained,
}

impl SchemeKind {
    pub fn default_label(self) -> &'static str {
        match self {
            SchemeKind::Euclidean => "euclidean",
            SchemeKind::Adam => "adam",
            SchemeKind::ExplicitConstrained => "explicit",
            SchemeKind::ImplicitConstrained => "implicit",
        }
    }

    pub fn is_constrained(self) -> bool {
        matches!(self, SchemeKind::ExplicitConstrained | SchemeKind::ImplicitConstrained)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerOptimizer {
    #[default]
    Adam,
    Gd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub kind: SchemeKind,
    pub tau: f64,
    pub outer_steps: usize,
    #[serde(default = "default_inner_steps")]
    pub inner_steps: usize,
    #[serde(default)]
    pub inner_optimizer: InnerOptimizer,
    #[serde(default = "default_inner_lr")]
    pub inner_lr: f64,
    #[serde(default)]
    pub adam_params: AdamParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_n: Option<usize>,
}

fn default_inner_steps() -> usize {
    1
}

fn default_inner_lr() -> f64 {
    1e-2
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind, tau: f64, outer_steps: usize) -> Self {
        Self {
            label: None,
            kind,
            tau,
            outer_steps,
            inner_steps: default_inner_steps(),
            inner_optimizer: InnerOptimizer::Adam,
            inner_lr: default_inner_lr(),
            adam_params: AdamParams::default(),
            batch_n: None,
        }
    }

    pub fn with_inner(mut self, steps: usize) -> Self {
        self.inner_steps = steps;
        self
    }

    pub fn with_batch(mut self, n: usize) -> Self {
        self.batch_n = Some(n);
        self
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.kind.default_label())
    }

    pub fn batch_size(&self) -> usize {
        self.batch_n.unwrap_or(DEFAULT_BATCH)
    }

    pub fn inner(&self) -> InnerSettings {
        InnerSettings {
            steps: self.inner_steps,
            optimizer: self.inner_optimizer,
            lr: self.inner_lr,
            adam: self.adam_params,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("method {}: {m}", self.label())));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if self.kind.is_constrained() && self.inner_steps == 0 {
            return bad("inner_steps must be at least 1".into());
        }
        if !(self.inner_lr > 0.0 && self.inner_lr.is_finite()) {
            return bad(format!("inner_lr must be positive, got {}", self.inner_lr));
        }
        if self.batch_size() < 2 {
            return bad("batch_n must be at least 2".into());
        }
        let p = &self.adam_params;
        if !(0.0..1.0).contains(&p.beta1) || !(0.0..1.0).contains(&p.beta2) || !(p.delta > 0.0) {
            return bad("adam parameters need β₁, β₂ ∈ [0, 1) and δ > 0".into());
        }
        Ok(())
    }
}

/// Inner-loop settings for the constrained schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSettings {
    pub steps: usize,
    pub optimizer: InnerOptimizer,
    pub lr: f64,
    pub adam: AdamParams,
}

impl Default for InnerSettings {
    fn default() -> Self {
        Self { steps: 100, optimizer: InnerOptimizer::Adam, lr: 1e-2, adam: AdamParams::default() }
    }
}

enum InnerUpdater {
    Adam(AdamState, AdamParams, f64),
    Gd(f64),
}

impl InnerUpdater {
    fn new(settings: &InnerSettings, m: usize) -> Self {
        match settings.optimizer {
            InnerOptimizer::Adam => InnerUpdater::Adam(AdamState::new(m), settings.adam, settings.lr),
            InnerOptimizer::Gd => InnerUpdater::Gd(settings.lr),
        }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        match self {
            InnerUpdater::Adam(state, params, lr) => state.step(theta, grad, *lr, params),
            InnerUpdater::Gd(lr) => {
                for (t, g) in theta.iter_mut().zip(grad) {
                    *t -= *lr * g;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub surrogate_loss: f64,
    pub grad_norm: f64,
    /// `‖T_{k+1} − T_k‖` in `L²(ρ̂)` on the step's batch.
    pub map_displacement: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inexactness_delta: Option<f64>,
}

/// Source of fresh sample batches from `ρ₀`.
pub trait Sampler {
    fn dim(&self) -> usize;
    fn sample(&self, n: usize, rng: &mut RunRng) -> PointCloud;
}

/// Always returns the same cloud, ignoring `n`.
#[derive(Debug, Clone)]
pub struct FixedCloud(pub PointCloud);

impl Sampler for FixedCloud {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn sample(&self, _n: usize, _rng: &mut RunRng) -> PointCloud {
        self.0.clone()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn mean_sq_row_norm(c: &PointCloud) -> f64 {
    let r = c.rms_norm();
    r * r
}

/// Loss reported for gradient-type steps: `D(ρ̂)` when computable, otherwise
/// the mean squared Wasserstein gradient `(1/n) Σ ‖g_i‖²`.
fn surrogate_of<F: Functional + ?Sized>(functional: &F, pushed: &PointCloud, field: &PointCloud) -> f64 {
    functional.value(pushed).unwrap_or_else(|| mean_sq_row_norm(field))
}

/// Euclidean gradient `∇_θ D(T_θ∗ρ̂) = (1/n) Σ_i J_iᵀ g_i` together with
/// the pushed points and field it was built from.
pub fn euclidean_gradient<M, F>(
    model: &M,
    functional: &F,
    theta: &[f64],
    batch: &PointCloud,
) -> Result<(Vec<f64>, PointCloud, PointCloud)>
where
    M: MapModel + ?Sized,
    F: Functional + ?Sized,
{
    let pushed = model.push_forward(theta, batch)?;
    let field = functional.grad_field(&pushed)?.vectors;
    let grad = model.loss_param_gradient(theta, batch, &field)?;
    Ok((grad, pushed, field))
}

fn displacement<M: MapModel + ?Sized>(
    model: &M,
    theta: &[f64],
    batch: &PointCloud,
    before: &PointCloud,
) -> Result<f64> {
    let after = model.push_forward(theta, batch)?;
    Ok(after.axpy(-1.0, before)?.rms_norm())
}

/// `θ_{k+1} = θ_k − τ ∇_θ D(T_θk∗ρ̂)`.
pub fn euclidean_step<M, F>(
    model: &M,
    functional: &F,
    theta: &[f64],
    batch: &PointCloud,
    tau: f64,
) -> Result<(Vec<f64>, StepDiagnostics)>
where
    M: MapModel + ?Sized,
    F: Functional + ?Sized,
{
    let (grad, pushed, field) = euclidean_gradient(model, functional, theta, batch)?;
    let next: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - tau * g).collect();
    let diag = StepDiagnostics {
        surrogate_loss: surrogate_of(functional, &pushed, &field),
        grad_norm: norm(&grad),
        map_displacement: displacement(model, &next, batch, &pushed)?,
        inexactness_delta: None,
    };
    Ok((next, diag))
}

/// One Adam update on the Euclidean gradient, `τ` used as learning rate.
pub fn adam_outer_step<M, F>(
    model: &M,
    functional: &F,
    theta: &[f64],
    state: &mut AdamState,
    params: &AdamParams,
    batch: &PointCloud,
    tau: f64,
) -> Result<(Vec<f64>, StepDiagnostics)>
where
    M: MapModel + ?Sized,
    F: Functional + ?Sized,
{
    let (grad, pushed, field) = euclidean_gradient(model, functional, theta, batch)?;
    let mut next = theta.to_vec();
    state.step(&mut next, &grad, tau, params);
    let diag = StepDiagnostics {
        surrogate_loss: surrogate_of(functional, &pushed, &field),
        grad_norm: norm(&grad),
        map_displacement: displacement(model, &next, batch, &pushed)?,
        inexactness_delta: None,
    };
    Ok((next, diag))
}

/// Result of an approximate inner minimization.
#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub theta: Vec<f64>,
    pub objective: f64,
    /// Objective at each evaluated inner iterate (including the start).
    pub trace: Vec<f64>,
}

fn push_inner<M: MapModel + ?Sized>(
    model: &M,
    theta: &[f64],
    batch: &PointCloud,
    iterate: usize,
) -> Result<PointCloud> {
    match model.push_forward(theta, batch) {
        Ok(p) if p.is_finite() => Ok(p),
        Ok(_) | Err(Error::NonFinite(_)) => Err(Error::InnerDivergence { iterate }),
        Err(e) => Err(e),
    }
}

/// Minimizes `(1/n) Σ_i ‖v_i − (T_θ(x_i) − T_θk(x_i))/τ‖²` from `θ_k`.
pub fn explicit_inner_solve<M: MapModel + ?Sized>(
    model: &M,
    theta_k: &[f64],
    batch: &PointCloud,
    descent_field: &PointCloud,
    tau: f64,
    inner: &InnerSettings,
) -> Result<InnerSolution> {
    let anchor = model.push_forward(theta_k, batch)?;
    anchor.check_same_shape(descent_field)?;
    let mut theta = theta_k.to_vec();
    let mut updater = InnerUpdater::new(inner, theta.len());
    let mut best = (f64::INFINITY, theta.clone());
    let mut trace = Vec::with_capacity(inner.steps + 1);
    for it in 0..=inner.steps {
        let pushed = push_inner(model, &theta, batch, it)?;
        let mut residual = pushed.axpy(-1.0, &anchor)?.scaled(1.0 / tau);
        residual = residual.axpy(-1.0, descent_field)?;
        let objective = mean_sq_row_norm(&residual);
        if !objective.is_finite() {
            return Err(Error::InnerDivergence { iterate: it });
        }
        trace.push(objective);
        if objective < best.0 {
            best = (objective, theta.clone());
        }
        if it == inner.steps {
            break;
        }
        let grad = model.loss_param_gradient(&theta, batch, &residual.scaled(2.0 / tau))?;
        updater.step(&mut theta, &grad);
    }
    Ok(InnerSolution { theta: best.1, objective: best.0, trace })
}

/// Explicit constrained step: the descent field `−∇_W D` is evaluated once at
/// `T_θk` and frozen while the inner problem is solved on the same batch.
pub fn explicit_constrained_step<M, F>(
    model: &M,
    functional: &F,
    theta_k: &[f64],
    batch: &PointCloud,
    tau: f64,
    inner: &InnerSettings,
) -> Result<(Vec<f64>, StepDiagnostics)>
where
    M: MapModel + ?Sized,
    F: Functional + ?Sized,
{
    let pushed = model.push_forward(theta_k, batch)?;
    let field = functional.grad_field(&pushed)?.vectors;
    let euclid = model.loss_param_gradient(theta_k, batch, &field)?;
    let descent = field.scaled(-1.0);
    let sol = explicit_inner_solve(model, theta_k, batch, &descent, tau, inner)?;
    let diag = StepDiagnostics {
        surrogate_loss: sol.objective,
        grad_norm: norm(&euclid),
        map_displacement: displacement(model, &sol.theta, batch, &pushed)?,
        inexactness_delta: None,
    };
    Ok((sol.theta, diag))
}

/// Implicit constrained (proximal) step.
///
/// Each inner iterate draws a batch from `batches`, refits the score on the
/// current pushed cloud and descends along
/// `(1/n) Σ_i J_iᵀ [g_i + (T_θ(x_i) − T_θk(x_i))/τ]`. When the functional
/// has a computable value the best inner iterate is returned, otherwise the
/// last one.
pub fn implicit_constrained_step<M, F, B>(
    model: &M,
    functional: &F,
    theta_k: &[f64],
    mut batches: B,
    tau: f64,
    inner: &InnerSettings,
) -> Result<(Vec<f64>, StepDiagnostics)>
where
    M: MapModel + ?Sized,
    F: Functional + ?Sized,
    B: FnMut() -> PointCloud,
{
    let mut theta = theta_k.to_vec();
    let mut updater = InnerUpdater::new(inner, theta.len());
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut last_residual = f64::NAN;
    let mut grad_norm = f64::NAN;
    let mut batch = batches();
    for it in 0..=inner.steps {
        if it > 0 {
            batch = batches();
        }
        let anchor = model.push_forward(theta_k, &batch)?;
        let pushed = push_inner(model, &theta, &batch, it)?;
        let diff = pushed.axpy(-1.0, &anchor)?;
        let prox = 0.5 * mean_sq_row_norm(&diff) / tau;
        if let Some(value) = functional.value(&pushed) {
            let objective = value + prox;
            if !objective.is_finite() {
                return Err(Error::InnerDivergence { iterate: it });
            }
            if best.as_ref().is_none_or(|(b, _)| objective < *b) {
                best = Some((objective, theta.clone()));
            }
        }
        if it == inner.steps {
            break;
        }
        let field = functional.grad_field(&pushed)?.vectors;
        let cot = field.axpy(1.0 / tau, &diff)?;
        last_residual = mean_sq_row_norm(&cot);
        if !last_residual.is_finite() {
            return Err(Error::InnerDivergence { iterate: it });
        }
        let grad = model.loss_param_gradient(&theta, &batch, &cot)?;
        if it == 0 {
            grad_norm = norm(&grad);
        }
        updater.step(&mut theta, &grad);
    }
    let (surrogate, theta_next) = match best {
        Some((obj, th)) => (obj, th),
        None => (last_residual, theta),
    };

    // inexactness certificate on the last batch:
    // δ_k = τ ‖g(T_{k+1}) + (T_{k+1} − T_k)/(2τ)‖ / ‖T_{k+1} − T_k‖
    let anchor = model.push_forward(theta_k, &batch)?;
    let pushed = model.push_forward(&theta_next, &batch)?;
    let diff = pushed.axpy(-1.0, &anchor)?;
    let step_norm = diff.rms_norm();
    let delta = if step_norm > 0.0 {
        let field = functional.grad_field(&pushed)?.vectors;
        let res = field.axpy(0.5 / tau, &diff)?.rms_norm();
        Some(tau * res / step_norm)
    } else {
        None
    };
    let diag = StepDiagnostics {
        surrogate_loss: surrogate,
        grad_norm,
        map_displacement: step_norm,
        inexactness_delta: delta,
    };
    Ok((theta_next, diag))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    /// Stopped early; the final parameters are the last good iterate.
    Aborted { step: usize, reason: String },
}

#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub theta_final: Vec<f64>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub termination: Termination,
}

/// Runs `outer_steps` steps of the configured scheme from `theta0`, drawing a
/// fresh batch of `batch_n` source samples per outer step (and per inner step
/// for the implicit scheme).
pub fn run_scheme<M, F, S>(
    model: &M,
    functional: &F,
    config: &SchemeConfig,
    theta0: &[f64],
    sampler: &S,
    rng: &mut RunRng,
) -> Result<SchemeRun>
where
    M: MapModel + ?Sized,
    F: Functional + ?Sized,
    S: Sampler + ?Sized,
{
    config.validate()?;
    model.check_params(theta0)?;
    if sampler.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch { expected: model.input_dim(), found: sampler.dim() });
    }
    let n = config.batch_size();
    let inner = config.inner();
    let mut theta = theta0.to_vec();
    let mut adam = AdamState::new(theta.len());
    let mut diagnostics = Vec::with_capacity(config.outer_steps);
    let mut termination = Termination::Completed;

    for k in 0..config.outer_steps {
        let step = match config.kind {
            SchemeKind::Euclidean => {
                let batch = sampler.sample(n, rng);
                euclidean_step(model, functional, &theta, &batch, config.tau)
            }
            SchemeKind::Adam => {
                let batch = sampler.sample(n, rng);
                adam_outer_step(model, functional, &theta, &mut adam, &config.adam_params, &batch, config.tau)
            }
            SchemeKind::ExplicitConstrained => {
                let batch = sampler.sample(n, rng);
                explicit_constrained_step(model, functional, &theta, &batch, config.tau, &inner)
            }
            SchemeKind::ImplicitConstrained => implicit_constrained_step(
                model,
                functional,
                &theta,
                || sampler.sample(n, rng),
                config.tau,
                &inner,
            ),
        };
        let (next, diag) = match step {
            Ok(s) => s,
            Err(e) => {
                termination = Termination::Aborted { step: k, reason: e.to_string() };
                break;
            }
        };
        if next.iter().any(|v| !v.is_finite()) {
            termination = Termination::Aborted { step: k, reason: "non-finite parameters".into() };
            break;
        }
        let surrogate = diag.surrogate_loss;
        diagnostics.push(diag);
        if !(surrogate <= DIVERGENCE_THRESHOLD) {
            termination = Termination::Aborted {
                step: k,
                reason: format!("surrogate {surrogate:e} exceeds {DIVERGENCE_THRESHOLD:e}"),
            };
            break;
        }
        theta = next;
    }
    Ok(SchemeRun { theta_final: theta, diagnostics, termination })
}

#[cfg(test)]
mod tests;
