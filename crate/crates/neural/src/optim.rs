use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::layers::Param;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Clone, Debug, Default)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// One bias-corrected Adam update at step `t` (1-based).
pub fn adam_step(
    name: &str,
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    t: u64,
    cfg: &AdamConfig,
) -> Result<()> {
    if t == 0 {
        return Err(NnError::InvalidConfig("adam step index starts at 1".into()));
    }
    if params.len() != grads.len() {
        return Err(NnError::Shape(format!("`{name}`: {} params vs {} grads", params.len(), grads.len())));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(NnError::NonFiniteGradient(name.to_string()));
    }
    if state.m.len() != params.len() {
        state.m = vec![0.0; params.len()];
        state.v = vec![0.0; params.len()];
    }
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

/// Adam over an ordered list of parameters.
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    t: u64,
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Self { cfg, t: 0, states: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update. Gradients are validated for every parameter before
    /// any value changes.
    pub fn step(&mut self, params: &mut [&mut Param]) -> Result<()> {
        if let Some(bad) = params.iter().find(|p| p.grad.iter().any(|g| !g.is_finite())) {
            return Err(NnError::NonFiniteGradient(bad.name.clone()));
        }
        if self.states.len() != params.len() {
            self.states = vec![AdamState::default(); params.len()];
        }
        self.t += 1;
        for (p, st) in params.iter_mut().zip(self.states.iter_mut()) {
            let Param { name, value, grad } = &mut **p;
            adam_step(name, value, grad, st, self.t, &self.cfg)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut theta = [0.5];
        let mut st = AdamState::default();
        adam_step("theta", &mut theta, &[1.0], &mut st, 1, &AdamConfig::default()).unwrap();
        assert!((0.5 - theta[0] - 0.001).abs() < 1e-10);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut theta = [0.5, -2.0];
        let mut st = AdamState::default();
        for t in 1..=3 {
            adam_step("theta", &mut theta, &[0.0, 0.0], &mut st, t, &AdamConfig::default()).unwrap();
        }
        assert_eq!(theta, [0.5, -2.0]);
    }

    #[test]
    fn equal_gradients_give_equal_step_sizes() {
        // m_t / (1 - b1^t) and v_t / (1 - b2^t) both equal g for constant g.
        let cfg = AdamConfig::default();
        let mut theta = [0.0];
        let mut st = AdamState::default();
        adam_step("theta", &mut theta, &[0.3], &mut st, 1, &cfg).unwrap();
        let first = -theta[0];
        adam_step("theta", &mut theta, &[0.3], &mut st, 2, &cfg).unwrap();
        let second = -theta[0] - first;
        assert!((first - second).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut a = Param::zeros("layer0.kernel", 2);
        let mut b = Param::zeros("layer1.bias", 1);
        b.grad[0] = f64::NAN;
        let mut opt = Adam::new(AdamConfig::default());
        let err = opt.step(&mut [&mut a, &mut b]).unwrap_err();
        assert!(matches!(err, NnError::NonFiniteGradient(ref n) if n == "layer1.bias"));
        assert_eq!(opt.steps(), 0);
    }
}
