//! Dense layer applied independently to every sequence position.
//!
//! `y_n = activation(W x_n + b)` with `W` laid out `(out_dim, in_dim)`
//! row-major. Softmax is applied per row; its outputs sum to 1.

use crate::error::{Error, Result};

use super::param::Parameter;
use super::tensor::Tensor2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    /// Row-wise softmax; numerically stabilized by max subtraction.
    SoftmaxRows,
}

#[derive(Debug, Clone)]
pub struct Dense {
    pub weights: Parameter,
    pub bias: Parameter,
    pub activation: Activation,
}

/// Forward state needed by the backward pass.
#[derive(Debug, Clone)]
pub struct DenseCtx {
    input: Tensor2,
    output: Tensor2,
}

impl Dense {
    pub fn new(weights: Parameter, bias: Parameter, activation: Activation) -> Self {
        assert_eq!(bias.cols(), 1, "bias must be a column vector");
        assert_eq!(bias.rows(), weights.rows(), "bias/weight row mismatch");
        Dense {
            weights,
            bias,
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, input: &Tensor2) -> Result<(Tensor2, DenseCtx)> {
        if input.cols() != self.in_dim() {
            return Err(Error::Shape {
                context: format!("dense layer '{}'", self.weights.name),
                expected: format!("input with {} columns", self.in_dim()),
                actual: input.shape_str(),
            });
        }
        let n = input.rows();
        let out_dim = self.out_dim();
        let mut out = Tensor2::zeros(n, out_dim);
        for r in 0..n {
            let x = input.row(r);
            let y = out.row_mut(r);
            for o in 0..out_dim {
                let mut sum = self.bias.value.get(o, 0);
                let w = self.weights.value.row(o);
                for (wi, xi) in w.iter().zip(x) {
                    sum += wi * xi;
                }
                y[o] = sum;
            }
            match self.activation {
                Activation::Identity => {}
                Activation::Relu => {
                    for v in y.iter_mut() {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                }
                Activation::SoftmaxRows => softmax_in_place(y),
            }
        }
        let ctx = DenseCtx {
            input: input.clone(),
            output: out.clone(),
        };
        Ok((out, ctx))
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, ctx: &DenseCtx, grad_out: &Tensor2) -> Tensor2 {
        assert_eq!(grad_out.rows(), ctx.output.rows());
        assert_eq!(grad_out.cols(), self.out_dim());
        let n = ctx.input.rows();
        let out_dim = self.out_dim();
        let in_dim = self.in_dim();
        let mut grad_in = Tensor2::zeros(n, in_dim);
        let mut d_pre = vec![0.0; out_dim];
        for r in 0..n {
            let y = ctx.output.row(r);
            let dy = grad_out.row(r);
            match self.activation {
                Activation::Identity => d_pre.copy_from_slice(dy),
                Activation::Relu => {
                    for o in 0..out_dim {
                        d_pre[o] = if y[o] > 0.0 { dy[o] } else { 0.0 };
                    }
                }
                Activation::SoftmaxRows => {
                    // d_pre_i = y_i * (dy_i - sum_j dy_j * y_j)
                    let dot: f64 = dy.iter().zip(y).map(|(a, b)| a * b).sum();
                    for o in 0..out_dim {
                        d_pre[o] = y[o] * (dy[o] - dot);
                    }
                }
            }
            let x = ctx.input.row(r);
            let gi = grad_in.row_mut(r);
            for o in 0..out_dim {
                let d = d_pre[o];
                *self.bias.grad.row_mut(o).first_mut().unwrap() += d;
                let wrow = self.weights.value.row(o);
                let grow = self.weights.grad.row_mut(o);
                for i in 0..in_dim {
                    grow[i] += d * x[i];
                    gi[i] += d * wrow[i];
                }
            }
        }
        grad_in
    }

    /// Backward for a head trained with a fused softmax/sigmoid loss: the
    /// incoming gradient is already w.r.t. the pre-activation logits.
    pub fn backward_from_logits(&mut self, ctx: &DenseCtx, grad_logits: &Tensor2) -> Tensor2 {
        let n = ctx.input.rows();
        let out_dim = self.out_dim();
        let in_dim = self.in_dim();
        let mut grad_in = Tensor2::zeros(n, in_dim);
        for r in 0..n {
            let d_pre = grad_logits.row(r);
            let x = ctx.input.row(r);
            let gi = grad_in.row_mut(r);
            for o in 0..out_dim {
                let d = d_pre[o];
                *self.bias.grad.row_mut(o).first_mut().unwrap() += d;
                let wrow = self.weights.value.row(o);
                let grow = self.weights.grad.row_mut(o);
                for i in 0..in_dim {
                    grow[i] += d * x[i];
                    gi[i] += d * wrow[i];
                }
            }
        }
        grad_in
    }
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Row-wise softmax of a full tensor; used to turn head logits into
/// probabilities.
pub fn softmax_rows(logits: &Tensor2) -> Tensor2 {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r));
    }
    out
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_dense(dim: usize, activation: Activation) -> Dense {
        let mut w = Tensor2::zeros(dim, dim);
        for i in 0..dim {
            w.set(i, i, 1.0);
        }
        Dense::new(
            Parameter::new("w", w),
            Parameter::new("b", Tensor2::zeros(dim, 1)),
            activation,
        )
    }

    #[test]
    fn identity_weights_identity_activation_pass_through() {
        let layer = identity_dense(2, Activation::Identity);
        let input = Tensor2::from_rows(&[vec![0.5, -1.5], vec![2.0, 3.0]]);
        let (out, _) = layer.forward(&input).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn zero_logits_softmax_is_uniform() {
        let layer = Dense::new(
            Parameter::new("w", Tensor2::zeros(3, 4)),
            Parameter::new("b", Tensor2::zeros(3, 1)),
            Activation::SoftmaxRows,
        );
        let input = Tensor2::zeros(1, 4);
        let (out, _) = layer.forward(&input).unwrap();
        for c in 0..3 {
            assert!((out.get(0, c) - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let logits = Tensor2::from_rows(&[vec![1.0, -2.0, 300.0], vec![0.0, 0.0, 0.0]]);
        let probs = softmax_rows(&logits);
        for r in 0..probs.rows() {
            let sum: f64 = probs.row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "row {r} sums to {sum}");
        }
    }

    #[test]
    fn shape_mismatch_is_a_fault() {
        let layer = identity_dense(2, Activation::Identity);
        let input = Tensor2::zeros(1, 3);
        assert!(layer.forward(&input).is_err());
    }
}
