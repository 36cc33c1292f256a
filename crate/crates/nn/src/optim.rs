//! ADAM with bias correction.

use crate::layers::ParamMut;
use crate::{NnError, Real, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer state: one first/second moment buffer per parameter tensor,
/// matched to parameters by position.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    config: AdamConfig,
    step: u64,
    moments: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Result<Self> {
        if !(config.learning_rate > 0.0) || !config.learning_rate.is_finite() {
            return Err(NnError::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                config.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&config.beta1) || !(0.0..1.0).contains(&config.beta2) {
            return Err(NnError::InvalidArgument("ADAM betas must lie in [0, 1)".into()));
        }
        Ok(Adam {
            config,
            step: 0,
            moments: Vec::new(),
        })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Number of completed updates.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update to every parameter. Gradients are checked for
    /// finiteness before anything is modified.
    pub fn step<'a>(&mut self, params: Vec<ParamMut<'a, T>>) -> Result<()> {
        for (i, p) in params.iter().enumerate() {
            if p.value.shape() != p.grad.shape() {
                return Err(NnError::shape(
                    format!("adam parameter {i} ({})", p.name),
                    p.value.shape(),
                    p.grad.shape(),
                ));
            }
            if !p.grad.all_finite() {
                return Err(NnError::NonFinite(format!(
                    "gradient of parameter {i} ({}) at step {}",
                    p.name,
                    self.step + 1
                )));
            }
        }
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| (vec![T::zero(); p.value.len()], vec![T::zero(); p.value.len()]))
                .collect();
        } else if self.moments.len() != params.len()
            || self.moments.iter().zip(&params).any(|(m, p)| m.0.len() != p.value.len())
        {
            return Err(NnError::InvalidArgument(
                "parameter set changed between ADAM steps".into(),
            ));
        }

        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let b1 = T::from_f64_lossy(c.beta1);
        let b2 = T::from_f64_lossy(c.beta2);
        let one = T::one();
        let lr = T::from_f64_lossy(c.learning_rate);
        let eps = T::from_f64_lossy(c.epsilon);
        let bc1 = T::from_f64_lossy(1.0 - c.beta1.powi(t));
        let bc2 = T::from_f64_lossy(1.0 - c.beta2.powi(t));

        for (p, (m, v)) in params.into_iter().zip(self.moments.iter_mut()) {
            let grad = p.grad.data();
            for (((theta, &g), mi), vi) in p.value.data_mut().iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (one - b1) * g;
                *vi = b2 * *vi + (one - b2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *theta = *theta - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    /// Convenience for a single tensor, used by tests and small problems.
    pub fn step_one(&mut self, value: &mut Tensor<T>, grad: &Tensor<T>) -> Result<()> {
        self.step(vec![ParamMut {
            name: "param",
            value,
            grad,
        }])
    }
}
