//! Trainable parameters: a value tensor plus its gradient accumulator and
//! RMSProp cache, all the same shape.

use super::tensor::Tensor2;

#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor2,
    pub grad: Tensor2,
    pub rms_cache: Tensor2,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor2) -> Self {
        let grad = Tensor2::zeros(value.rows(), value.cols());
        let rms_cache = grad.clone();
        Parameter {
            name: name.into(),
            value,
            grad,
            rms_cache,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn rows(&self) -> usize {
        self.value.rows()
    }

    pub fn cols(&self) -> usize {
        self.value.cols()
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Anything with an ordered, named set of trainable parameters.
///
/// The order must be stable: it drives optimizer sweeps, gradient checks and
/// bundle serialization.
pub trait ParamSet {
    fn params(&self) -> Vec<&Parameter>;
    fn params_mut(&mut self) -> Vec<&mut Parameter>;

    fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
