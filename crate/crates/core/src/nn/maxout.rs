//! Maxout layer: element-wise maximum over several affine maps of the input.
//!
//! Gradient flows only into the piece that won the max; exact ties go to the
//! lowest piece index.

use crate::error::{Error, Result};

use super::param::Parameter;
use super::tensor::Tensor2;

#[derive(Debug, Clone)]
pub struct MaxoutPiece {
    pub weights: Parameter,
    pub bias: Parameter,
}

#[derive(Debug, Clone)]
pub struct Maxout {
    pub pieces: Vec<MaxoutPiece>,
}

#[derive(Debug, Clone)]
pub struct MaxoutCtx {
    input: Tensor2,
    /// Winning piece index per output element, row-major.
    argmax: Vec<u8>,
}

impl Maxout {
    pub fn new(pieces: Vec<MaxoutPiece>) -> Self {
        assert!(pieces.len() >= 2, "maxout needs at least two pieces");
        let (r, c) = (pieces[0].weights.rows(), pieces[0].weights.cols());
        for p in &pieces {
            assert_eq!(
                (p.weights.rows(), p.weights.cols()),
                (r, c),
                "piece shape mismatch"
            );
            assert_eq!(p.bias.rows(), r);
        }
        Maxout { pieces }
    }

    pub fn in_dim(&self) -> usize {
        self.pieces[0].weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.pieces[0].weights.rows()
    }

    pub fn forward(&self, input: &Tensor2) -> Result<(Tensor2, MaxoutCtx)> {
        if input.cols() != self.in_dim() {
            return Err(Error::Shape {
                context: format!("maxout layer '{}'", self.pieces[0].weights.name),
                expected: format!("input with {} columns", self.in_dim()),
                actual: input.shape_str(),
            });
        }
        let n = input.rows();
        let out_dim = self.out_dim();
        let mut out = Tensor2::zeros(n, out_dim);
        let mut argmax = vec![0u8; n * out_dim];
        for r in 0..n {
            let x = input.row(r);
            for o in 0..out_dim {
                let mut best = f64::NEG_INFINITY;
                let mut best_piece = 0u8;
                for (pi, piece) in self.pieces.iter().enumerate() {
                    let mut sum = piece.bias.value.get(o, 0);
                    for (wi, xi) in piece.weights.value.row(o).iter().zip(x) {
                        sum += wi * xi;
                    }
                    // Strict > keeps the lowest piece index on ties.
                    if sum > best {
                        best = sum;
                        best_piece = pi as u8;
                    }
                }
                out.set(r, o, best);
                argmax[r * out_dim + o] = best_piece;
            }
        }
        let ctx = MaxoutCtx {
            input: input.clone(),
            argmax,
        };
        Ok((out, ctx))
    }

    pub fn backward(&mut self, ctx: &MaxoutCtx, grad_out: &Tensor2) -> Tensor2 {
        let n = ctx.input.rows();
        let out_dim = self.out_dim();
        let in_dim = self.in_dim();
        assert_eq!(grad_out.rows(), n);
        assert_eq!(grad_out.cols(), out_dim);
        let mut grad_in = Tensor2::zeros(n, in_dim);
        for r in 0..n {
            let x = ctx.input.row(r);
            let dy = grad_out.row(r);
            for o in 0..out_dim {
                let d = dy[o];
                if d == 0.0 {
                    continue;
                }
                let piece = &mut self.pieces[ctx.argmax[r * out_dim + o] as usize];
                *piece.bias.grad.row_mut(o).first_mut().unwrap() += d;
                let wrow = piece.weights.value.row(o);
                let grow = piece.weights.grad.row_mut(o);
                let gi = grad_in.row_mut(r);
                for i in 0..in_dim {
                    grow[i] += d * x[i];
                    gi[i] += d * wrow[i];
                }
            }
        }
        grad_in
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn piece(name: &str, w: Tensor2) -> MaxoutPiece {
        let rows = w.rows();
        MaxoutPiece {
            weights: Parameter::new(format!("{name}.w"), w),
            bias: Parameter::new(format!("{name}.b"), Tensor2::zeros(rows, 1)),
        }
    }

    #[test]
    fn identical_pieces_equal_either_affine_output() {
        let w = Tensor2::from_rows(&[vec![1.0, -2.0]]);
        let m = Maxout::new(vec![piece("p0", w.clone()), piece("p1", w.clone())]);
        let input = Tensor2::from_rows(&[vec![3.0, 0.5]]);
        let (out, ctx) = m.forward(&input).unwrap();
        assert_eq!(out.get(0, 0), 3.0 - 1.0);
        // Tie resolves to the lowest piece index.
        assert_eq!(ctx.argmax, vec![0]);
    }

    #[test]
    fn max_selects_larger_piece() {
        let m = Maxout::new(vec![
            piece("p0", Tensor2::from_rows(&[vec![-1.0]])),
            piece("p1", Tensor2::from_rows(&[vec![5.0]])),
        ]);
        let input = Tensor2::from_rows(&[vec![1.0]]);
        let (out, _) = m.forward(&input).unwrap();
        assert_eq!(out.get(0, 0), 5.0);
    }

    #[test]
    fn gradient_routes_only_to_winning_piece() {
        let mut m = Maxout::new(vec![
            piece("p0", Tensor2::from_rows(&[vec![-1.0]])),
            piece("p1", Tensor2::from_rows(&[vec![5.0]])),
        ]);
        let input = Tensor2::from_rows(&[vec![1.0]]);
        let (_, ctx) = m.forward(&input).unwrap();
        let grad = m.backward(&ctx, &Tensor2::from_rows(&[vec![2.0]]));
        assert_eq!(m.pieces[0].weights.grad.get(0, 0), 0.0);
        assert_eq!(m.pieces[1].weights.grad.get(0, 0), 2.0);
        assert_eq!(grad.get(0, 0), 2.0 * 5.0);
    }

    #[test]
    fn tie_routes_to_lowest_piece() {
        let w = Tensor2::from_rows(&[vec![1.0]]);
        let mut m = Maxout::new(vec![piece("p0", w.clone()), piece("p1", w)]);
        let input = Tensor2::from_rows(&[vec![1.0]]);
        let (_, ctx) = m.forward(&input).unwrap();
        m.backward(&ctx, &Tensor2::from_rows(&[vec![1.0]]));
        assert_eq!(m.pieces[0].weights.grad.get(0, 0), 1.0);
        assert_eq!(m.pieces[1].weights.grad.get(0, 0), 0.0);
    }
}
