//! RMSProp parameter updates, one sample at a time.
//!
//! Per entry: `cache = rho * cache + (1 - rho) * g^2` then
//! `value -= lr * g / (sqrt(cache) + eps)`. The gradient accumulator is
//! cleared after every step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::param::Parameter;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub decay_rho: f64,
    pub epsilon: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        RmsPropConfig {
            learning_rate: 0.001,
            decay_rho: 0.9,
            epsilon: 1e-6,
        }
    }
}

impl RmsPropConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if !(0.0 < self.decay_rho && self.decay_rho < 1.0) {
            return Err(Error::Config("decay_rho must be in (0, 1)".into()));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::Config("epsilon must be > 0".into()));
        }
        Ok(())
    }
}

pub fn rmsprop_step(param: &mut Parameter, config: &RmsPropConfig) -> Result<()> {
    if !param.grad.all_finite() {
        return Err(Error::NonFinite {
            context: format!("gradient of parameter '{}'", param.name),
        });
    }
    let rho = config.decay_rho;
    let lr = config.learning_rate;
    let eps = config.epsilon;
    let value = param.value.data_mut();
    let grad = param.grad.data_mut();
    let cache = param.rms_cache.data_mut();
    for i in 0..value.len() {
        let g = grad[i];
        cache[i] = rho * cache[i] + (1.0 - rho) * g * g;
        value[i] -= lr * g / (cache[i].sqrt() + eps);
        grad[i] = 0.0;
    }
    Ok(())
}
