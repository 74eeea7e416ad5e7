//! Losses with fused pre-activation gradients.
//!
//! Both losses take the post-activation probabilities but return gradients
//! with respect to the pre-softmax / pre-sigmoid values, which is the
//! numerically stable route when the head activation feeds straight into the
//! loss.

use crate::error::{Error, Result};

use super::tensor::Tensor2;

const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct CrossEntropy {
    pub loss: f64,
    /// Gradient w.r.t. the pre-softmax logits: (p - onehot) / N.
    pub logit_grad: Tensor2,
    /// Number of target probabilities that hit the clamp floor.
    pub clamped: usize,
}

/// Mean categorical cross-entropy over the rows of a probability tensor.
pub fn cross_entropy_loss(probabilities: &Tensor2, targets: &[usize]) -> Result<CrossEntropy> {
    let n = probabilities.rows();
    if targets.len() != n {
        return Err(Error::Shape {
            context: "cross entropy".to_string(),
            expected: format!("{n} targets"),
            actual: format!("{}", targets.len()),
        });
    }
    let classes = probabilities.cols();
    let mut loss = 0.0;
    let mut clamped = 0;
    let mut grad = probabilities.clone();
    let inv_n = 1.0 / n.max(1) as f64;
    for (row, &target) in targets.iter().enumerate() {
        if target >= classes {
            return Err(Error::IndexOutOfRange {
                index: target,
                position: row,
                rows: classes,
            });
        }
        let mut p = probabilities.get(row, target);
        if p < PROB_FLOOR {
            p = PROB_FLOOR;
            clamped += 1;
        }
        loss -= p.ln();
        let g = grad.row_mut(row);
        for v in g.iter_mut() {
            *v *= inv_n;
        }
        g[target] -= inv_n;
    }
    Ok(CrossEntropy {
        loss: loss * inv_n,
        logit_grad: grad,
        clamped,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct BinaryCrossEntropy {
    pub loss: f64,
    /// Gradient w.r.t. the pre-sigmoid value: p - t.
    pub logit_grad: f64,
}

pub fn binary_cross_entropy_loss(probability: f64, target: bool) -> BinaryCrossEntropy {
    let p = probability.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    let t = if target { 1.0 } else { 0.0 };
    BinaryCrossEntropy {
        loss: -(t * p.ln() + (1.0 - t) * (1.0 - p).ln()),
        logit_grad: p - t,
    }
}
