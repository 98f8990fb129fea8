use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Parameter, Real};

/// Adam hyperparameters; `Default` gives lr 0.001, β₁ 0.9, β₂ 0.999, ε 1e-8.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam update in place, then clears the gradients.
/// `step` is 1-based.
pub fn adam_step<'a, T: Real>(
    params: impl IntoIterator<Item = &'a mut Parameter<T>>,
    step: u64,
    config: &AdamConfig,
) -> Result<()> {
    if step < 1 {
        return Err(Error::usage("adam step count starts at 1"));
    }
    let t = step as i32;
    let b1 = T::lit(config.beta1);
    let b2 = T::lit(config.beta2);
    let one = T::one();
    let correction1 = T::lit(1.0 - config.beta1.powi(t));
    let correction2 = T::lit(1.0 - config.beta2.powi(t));
    let lr = T::lit(config.lr);
    let eps = T::lit(config.epsilon);

    for p in params {
        let Parameter {
            value,
            grad,
            first_moment,
            second_moment,
            ..
        } = p;
        let values = value.data_mut();
        let grads = grad.data_mut();
        let m = first_moment.data_mut();
        let v = second_moment.data_mut();
        for j in 0..values.len() {
            let g = grads[j];
            m[j] = b1 * m[j] + (one - b1) * g;
            v[j] = b2 * v[j] + (one - b2) * g * g;
            let m_hat = m[j] / correction1;
            let v_hat = v[j] / correction2;
            values[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            grads[j] = T::zero();
        }
    }
    Ok(())
}
