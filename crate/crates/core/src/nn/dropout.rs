//! Inverted dropout: surviving elements are scaled by 1/(1-p) at train time
//! so that inference is a plain identity.

use rand::Rng;

use super::tensor::Tensor2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Infer,
}

/// Per-element multipliers recorded at forward time; backward reuses them.
#[derive(Debug, Clone)]
pub struct DropoutMask {
    scale: Option<Vec<f64>>,
}

pub fn dropout_apply<R: Rng>(
    input: &Tensor2,
    p: f64,
    mode: DropoutMode,
    rng: &mut R,
) -> (Tensor2, DropoutMask) {
    assert!(
        (0.0..1.0).contains(&p),
        "drop probability must be in [0, 1)"
    );
    if mode == DropoutMode::Infer || p == 0.0 {
        return (input.clone(), DropoutMask { scale: None });
    }
    let keep_scale = 1.0 / (1.0 - p);
    let mut out = input.clone();
    let mut scale = Vec::with_capacity(input.len());
    for v in out.data_mut() {
        let s = if rng.gen::<f64>() < p {
            0.0
        } else {
            keep_scale
        };
        *v *= s;
        scale.push(s);
    }
    (out, DropoutMask { scale: Some(scale) })
}

pub fn dropout_backward(mask: &DropoutMask, grad_out: &Tensor2) -> Tensor2 {
    match &mask.scale {
        None => grad_out.clone(),
        Some(scale) => {
            let mut grad = grad_out.clone();
            for (g, s) in grad.data_mut().iter_mut().zip(scale) {
                *g *= s;
            }
            grad
        }
    }
}
