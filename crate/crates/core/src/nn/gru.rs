//! Gated recurrent unit layer with hand-written backpropagation through time.
//!
//! Gate equations, with the reset gate applied to the previous state before
//! the recurrent matmul:
//!
//! - `z_n = sigm(W_z x_n + U_z h_{n-1} + b_z)`
//! - `r_n = sigm(W_r x_n + U_r h_{n-1} + b_r)`
//! - `c_n = tanh(W_h x_n + U_h (r_n * h_{n-1}) + b_h)`
//! - `h_n = (1 - z_n) * h_{n-1} + z_n * c_n`
//!
//! The initial hidden state is the zero vector. The output is the full
//! sequence of hidden states; callers that only want the final state take the
//! last row.

use crate::error::{Error, Result};

use super::dense::sigmoid;
use super::param::Parameter;
use super::tensor::Tensor2;

#[derive(Debug, Clone)]
pub struct Gru {
    pub w_z: Parameter,
    pub u_z: Parameter,
    pub b_z: Parameter,
    pub w_r: Parameter,
    pub u_r: Parameter,
    pub b_r: Parameter,
    pub w_h: Parameter,
    pub u_h: Parameter,
    pub b_h: Parameter,
}

#[derive(Debug, Clone)]
pub struct GruCtx {
    input: Tensor2,
    z: Tensor2,
    r: Tensor2,
    cand: Tensor2,
    states: Tensor2,
}

impl Gru {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        w_z: Parameter,
        u_z: Parameter,
        b_z: Parameter,
        w_r: Parameter,
        u_r: Parameter,
        b_r: Parameter,
        w_h: Parameter,
        u_h: Parameter,
        b_h: Parameter,
    ) -> Self {
        let hidden = w_z.rows();
        let input = w_z.cols();
        for (w, u, b) in [(&w_z, &u_z, &b_z), (&w_r, &u_r, &b_r), (&w_h, &u_h, &b_h)] {
            assert_eq!((w.rows(), w.cols()), (hidden, input));
            assert_eq!((u.rows(), u.cols()), (hidden, hidden));
            assert_eq!((b.rows(), b.cols()), (hidden, 1));
        }
        Gru {
            w_z,
            u_z,
            b_z,
            w_r,
            u_r,
            b_r,
            w_h,
            u_h,
            b_h,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.rows()
    }

    pub fn params(&self) -> Vec<&Parameter> {
        vec![
            &self.w_z, &self.u_z, &self.b_z, &self.w_r, &self.u_r, &self.b_r, &self.w_h, &self.u_h,
            &self.b_h,
        ]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![
            &mut self.w_z,
            &mut self.u_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.b_r,
            &mut self.w_h,
            &mut self.u_h,
            &mut self.b_h,
        ]
    }

    pub fn forward(&self, input: &Tensor2) -> Result<(Tensor2, GruCtx)> {
        if input.cols() != self.in_dim() {
            return Err(Error::Shape {
                context: format!("gru layer '{}'", self.w_z.name),
                expected: format!("input with {} columns", self.in_dim()),
                actual: input.shape_str(),
            });
        }
        let n = input.rows();
        let h = self.hidden_dim();
        let mut z_t = Tensor2::zeros(n, h);
        let mut r_t = Tensor2::zeros(n, h);
        let mut cand_t = Tensor2::zeros(n, h);
        let mut states = Tensor2::zeros(n, h);
        let mut h_prev = vec![0.0; h];
        let mut pre_z = vec![0.0; h];
        let mut pre_r = vec![0.0; h];
        let mut pre_c = vec![0.0; h];
        let mut reset_prev = vec![0.0; h];
        for step in 0..n {
            let x = input.row(step);
            affine(&self.w_z.value, x, &self.b_z.value, &mut pre_z);
            matvec_add(&self.u_z.value, &h_prev, &mut pre_z);
            affine(&self.w_r.value, x, &self.b_r.value, &mut pre_r);
            matvec_add(&self.u_r.value, &h_prev, &mut pre_r);
            for i in 0..h {
                pre_z[i] = sigmoid(pre_z[i]);
                pre_r[i] = sigmoid(pre_r[i]);
                reset_prev[i] = pre_r[i] * h_prev[i];
            }
            affine(&self.w_h.value, x, &self.b_h.value, &mut pre_c);
            matvec_add(&self.u_h.value, &reset_prev, &mut pre_c);
            let state = states.row_mut(step);
            for i in 0..h {
                let c = pre_c[i].tanh();
                cand_t.set(step, i, c);
                state[i] = (1.0 - pre_z[i]) * h_prev[i] + pre_z[i] * c;
            }
            z_t.row_mut(step).copy_from_slice(&pre_z);
            r_t.row_mut(step).copy_from_slice(&pre_r);
            h_prev.copy_from_slice(state);
        }
        let ctx = GruCtx {
            input: input.clone(),
            z: z_t,
            r: r_t,
            cand: cand_t,
            states: states.clone(),
        };
        Ok((states, ctx))
    }

    /// Backpropagation through time. `grad_states` carries dLoss/dh_n for
    /// every step; pass zero rows for steps the loss does not read.
    pub fn backward(&mut self, ctx: &GruCtx, grad_states: &Tensor2) -> Tensor2 {
        let n = ctx.input.rows();
        let h = self.hidden_dim();
        let in_dim = self.in_dim();
        assert_eq!(grad_states.rows(), n);
        assert_eq!(grad_states.cols(), h);
        let mut grad_in = Tensor2::zeros(n, in_dim);
        let mut carry = vec![0.0; h];
        let zero = vec![0.0; h];
        let mut delta = vec![0.0; h];
        let mut da_z = vec![0.0; h];
        let mut da_r = vec![0.0; h];
        let mut da_c = vec![0.0; h];
        let mut d_reset = vec![0.0; h];
        let mut reset_prev = vec![0.0; h];
        for step in (0..n).rev() {
            let h_prev: &[f64] = if step == 0 {
                &zero
            } else {
                ctx.states.row(step - 1)
            };
            let z = ctx.z.row(step);
            let r = ctx.r.row(step);
            let c = ctx.cand.row(step);
            for i in 0..h {
                delta[i] = grad_states.get(step, i) + carry[i];
            }
            for i in 0..h {
                let d_c = delta[i] * z[i];
                da_c[i] = d_c * (1.0 - c[i] * c[i]);
                let d_z = delta[i] * (c[i] - h_prev[i]);
                da_z[i] = d_z * z[i] * (1.0 - z[i]);
                carry[i] = delta[i] * (1.0 - z[i]); // dL/dh_prev, more added below
                reset_prev[i] = r[i] * h_prev[i];
            }
            // Candidate path.
            let x = ctx.input.row(step);
            accumulate_affine_grads(&mut self.w_h, &mut self.b_h, &da_c, x);
            accumulate_matmul_grads(&mut self.u_h, &da_c, &reset_prev);
            matvec_transpose(&self.u_h.value, &da_c, &mut d_reset);
            for i in 0..h {
                let d_r = d_reset[i] * h_prev[i];
                da_r[i] = d_r * r[i] * (1.0 - r[i]);
                carry[i] += d_reset[i] * r[i];
            }
            // Reset gate path.
            accumulate_affine_grads(&mut self.w_r, &mut self.b_r, &da_r, x);
            accumulate_matmul_grads(&mut self.u_r, &da_r, h_prev);
            matvec_transpose_add(&self.u_r.value, &da_r, &mut carry);
            // Update gate path.
            accumulate_affine_grads(&mut self.w_z, &mut self.b_z, &da_z, x);
            accumulate_matmul_grads(&mut self.u_z, &da_z, h_prev);
            matvec_transpose_add(&self.u_z.value, &da_z, &mut carry);
            // Input gradient.
            let gi = grad_in.row_mut(step);
            matvec_transpose(&self.w_z.value, &da_z, gi);
            matvec_transpose_add(&self.w_r.value, &da_r, gi);
            matvec_transpose_add(&self.w_h.value, &da_c, gi);
        }
        grad_in
    }
}

/// out = M x + b
fn affine(m: &Tensor2, x: &[f64], b: &Tensor2, out: &mut [f64]) {
    for (o, slot) in out.iter_mut().enumerate() {
        let mut sum = b.get(o, 0);
        for (wi, xi) in m.row(o).iter().zip(x) {
            sum += wi * xi;
        }
        *slot = sum;
    }
}

/// out += M x
fn matvec_add(m: &Tensor2, x: &[f64], out: &mut [f64]) {
    for (o, slot) in out.iter_mut().enumerate() {
        let mut sum = 0.0;
        for (wi, xi) in m.row(o).iter().zip(x) {
            sum += wi * xi;
        }
        *slot += sum;
    }
}

/// out = M^T d
fn matvec_transpose(m: &Tensor2, d: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (o, &di) in d.iter().enumerate() {
        if di == 0.0 {
            continue;
        }
        for (slot, wi) in out.iter_mut().zip(m.row(o)) {
            *slot += di * wi;
        }
    }
}

/// out += M^T d
fn matvec_transpose_add(m: &Tensor2, d: &[f64], out: &mut [f64]) {
    for (o, &di) in d.iter().enumerate() {
        if di == 0.0 {
            continue;
        }
        for (slot, wi) in out.iter_mut().zip(m.row(o)) {
            *slot += di * wi;
        }
    }
}

/// w.grad += d (outer) x; b.grad += d
fn accumulate_affine_grads(w: &mut Parameter, b: &mut Parameter, d: &[f64], x: &[f64]) {
    for (o, &di) in d.iter().enumerate() {
        *b.grad.row_mut(o).first_mut().unwrap() += di;
        for (slot, xi) in w.grad.row_mut(o).iter_mut().zip(x) {
            *slot += di * xi;
        }
    }
}

/// u.grad += d (outer) x, without a bias term.
fn accumulate_matmul_grads(u: &mut Parameter, d: &[f64], x: &[f64]) {
    for (o, &di) in d.iter().enumerate() {
        for (slot, xi) in u.grad.row_mut(o).iter_mut().zip(x) {
            *slot += di * xi;
        }
    }
}
