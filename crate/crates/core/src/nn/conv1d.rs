//! 1-d convolution over a sequence of feature vectors.
//!
//! Each output position is a rectified affine map of the `width` input rows
//! centered on it; rows outside the sequence are zero vectors, so output
//! length equals input length. The kernel is laid out `(out_dim,
//! in_dim * width)` row-major, matching the concatenated window.

use crate::error::{Error, Result};

use super::param::Parameter;
use super::tensor::Tensor2;

#[derive(Debug, Clone)]
pub struct Conv1d {
    pub kernel: Parameter,
    pub bias: Parameter,
    pub width: usize,
}

#[derive(Debug, Clone)]
pub struct Conv1dCtx {
    input: Tensor2,
    output: Tensor2,
}

impl Conv1d {
    pub fn new(kernel: Parameter, bias: Parameter, width: usize) -> Self {
        assert!(width % 2 == 1, "convolution width must be odd");
        assert_eq!(bias.rows(), kernel.rows(), "bias/kernel row mismatch");
        assert_eq!(bias.cols(), 1, "bias must be a column vector");
        Conv1d {
            kernel,
            bias,
            width,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.kernel.cols() / self.width
    }

    pub fn out_dim(&self) -> usize {
        self.kernel.rows()
    }

    pub fn forward(&self, input: &Tensor2) -> Result<(Tensor2, Conv1dCtx)> {
        if input.cols() * self.width != self.kernel.cols() {
            return Err(Error::Shape {
                context: format!("convolution '{}'", self.kernel.name),
                expected: format!(
                    "input with {} columns (kernel covers {})",
                    self.in_dim(),
                    self.kernel.cols()
                ),
                actual: input.shape_str(),
            });
        }
        let n = input.rows();
        let in_dim = input.cols();
        let out_dim = self.out_dim();
        let half = (self.width as isize - 1) / 2;
        let mut out = Tensor2::zeros(n, out_dim);
        for pos in 0..n as isize {
            let y = out.row_mut(pos as usize);
            for o in 0..out_dim {
                let krow = self.kernel.value.row(o);
                let mut sum = self.bias.value.get(o, 0);
                for (w, offset) in (-half..=half).enumerate() {
                    let src = pos + offset;
                    if src < 0 || src >= n as isize {
                        continue; // zero padding
                    }
                    let x = input.row(src as usize);
                    let k = &krow[w * in_dim..(w + 1) * in_dim];
                    for (ki, xi) in k.iter().zip(x) {
                        sum += ki * xi;
                    }
                }
                y[o] = if sum > 0.0 { sum } else { 0.0 };
            }
        }
        let ctx = Conv1dCtx {
            input: input.clone(),
            output: out.clone(),
        };
        Ok((out, ctx))
    }

    /// Accumulates kernel/bias gradients and returns the input gradient.
    pub fn backward(&mut self, ctx: &Conv1dCtx, grad_out: &Tensor2) -> Tensor2 {
        let n = ctx.input.rows();
        let in_dim = ctx.input.cols();
        let out_dim = self.out_dim();
        let half = (self.width as isize - 1) / 2;
        let mut grad_in = Tensor2::zeros(n, in_dim);
        for pos in 0..n as isize {
            let y = ctx.output.row(pos as usize);
            let dy = grad_out.row(pos as usize);
            for o in 0..out_dim {
                // ReLU gate: positions that clipped to zero pass nothing.
                if y[o] <= 0.0 {
                    continue;
                }
                let d = dy[o];
                if d == 0.0 {
                    continue;
                }
                *self.bias.grad.row_mut(o).first_mut().unwrap() += d;
                let krow = self.kernel.value.row(o);
                let grow = self.kernel.grad.row_mut(o);
                for (w, offset) in (-half..=half).enumerate() {
                    let src = pos + offset;
                    if src < 0 || src >= n as isize {
                        continue;
                    }
                    let x = ctx.input.row(src as usize);
                    let gi = grad_in.row_mut(src as usize);
                    let base = w * in_dim;
                    for i in 0..in_dim {
                        grow[base + i] += d * x[i];
                        gi[i] += d * krow[base + i];
                    }
                }
            }
        }
        #[cfg(feature = "planted-grad-bug")]
        {
            for v in self.kernel.grad.data_mut() {
                *v *= 2.0;
            }
        }
        grad_in
    }
}
