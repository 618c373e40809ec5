use serde::{Deserialize, Serialize};

use crate::autodiff::ParamVector;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if !ok {
            return Err(Error::config(format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(n: usize, config: AdamConfig) -> Self {
        AdamState {
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
            config,
        }
    }

    /// One bias-corrected update in place. A non-finite gradient leaves
    /// everything untouched and reports the step index as the epoch.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::structural(format!(
                "Adam state has {} entries, params {} and gradient {}",
                self.m.len(),
                params.len(),
                grad.len()
            )));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Training {
                epoch: self.t as usize,
                reason: format!("gradient component {i} is {}", grad[i]),
            });
        }
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

pub fn adam_step(params: &mut ParamVector, grad: &ParamVector, state: &mut AdamState) -> Result<()> {
    state.step(params, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = ParamVector(vec![0.3, -1.2]);
        let mut s = AdamState::new(2, AdamConfig::default());
        adam_step(&mut p, &ParamVector::zeros(2), &mut s).unwrap();
        assert_eq!(p.0, vec![0.3, -1.2]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_closed_form() {
        let mut p = ParamVector(vec![0.0]);
        let mut s = AdamState::new(1, AdamConfig::default());
        adam_step(&mut p, &ParamVector(vec![0.5]), &mut s).unwrap();
        assert_relative_eq!(p[0], -9.99999980e-4, max_relative = 1e-12);
    }

    #[test]
    fn repeated_gradient_step_bounded_by_lr() {
        let mut p = ParamVector(vec![0.0]);
        let mut s = AdamState::new(1, AdamConfig::default());
        adam_step(&mut p, &ParamVector(vec![0.5]), &mut s).unwrap();
        let before = p[0];
        adam_step(&mut p, &ParamVector(vec![0.5]), &mut s).unwrap();
        let step = (p[0] - before).abs();
        assert!(step > 0.0 && step <= 1e-3);
    }

    #[test]
    fn doubling_lr_doubles_first_step() {
        let g = ParamVector(vec![0.7, -0.02]);
        let mut a = ParamVector::zeros(2);
        let mut b = ParamVector::zeros(2);
        adam_step(&mut a, &g, &mut AdamState::new(2, AdamConfig::default())).unwrap();
        let cfg = AdamConfig {
            learning_rate: 2e-3,
            ..AdamConfig::default()
        };
        adam_step(&mut b, &g, &mut AdamState::new(2, cfg)).unwrap();
        assert_eq!(b[0], 2.0 * a[0]);
        assert_eq!(b[1], 2.0 * a[1]);
    }

    #[test]
    fn non_finite_gradient_is_training_error() {
        let mut p = ParamVector::zeros(2);
        let mut s = AdamState::new(2, AdamConfig::default());
        adam_step(&mut p, &ParamVector(vec![0.1, 0.1]), &mut s).unwrap();
        let err = adam_step(&mut p, &ParamVector(vec![f64::NAN, 0.0]), &mut s).unwrap_err();
        assert!(matches!(err, Error::Training { epoch: 1, .. }));
        assert_eq!(s.t, 1);
    }
}
