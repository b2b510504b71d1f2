use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_delta() -> f64 {
    1e-8
}

impl Default for AdamParams {
    fn default() -> Self {
        Self { beta1: default_beta1(), beta2: default_beta2(), delta: default_delta() }
    }
}

/// Bias-corrected first and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { first_moment: vec![0.0; len], second_moment: vec![0.0; len], step_count: 0 }
    }

    /// In-place update `θ ← θ − lr · m̂ / (√v̂ + δ)`.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64, p: &AdamParams) {
        debug_assert_eq!(theta.len(), grad.len());
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - p.beta1.powi(t);
        let c2 = 1.0 - p.beta2.powi(t);
        for (((th, g), m), v) in theta
            .iter_mut()
            .zip(grad)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = p.beta1 * *m + (1.0 - p.beta1) * g;
            *v = p.beta2 * *v + (1.0 - p.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *th -= lr * m_hat / (v_hat.sqrt() + p.delta);
        }
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step(
    theta: &[f64],
    state: &AdamState,
    grad: &[f64],
    lr: f64,
    params: &AdamParams,
) -> (Vec<f64>, AdamState) {
    let mut theta = theta.to_vec();
    let mut state = state.clone();
    state.step(&mut theta, grad, lr, params);
    (theta, state)
}
