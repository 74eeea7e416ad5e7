//! Central finite-difference gradient checker.
//!
//! The numeric side only ever calls the model's forward pass, so it stays
//! independent of every hand-written backward path it is used to verify.

use crate::error::Result;

use super::param::ParamSet;

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const REL_ERR_TOLERANCE: f64 = 1e-4;

/// Floor of the relative-error denominator. Entries whose gradient is below
/// this magnitude are compared in absolute terms against `floor * tolerance`:
/// central differences at eps = 1e-5 carry ~1e-11 of rounding and truncation
/// noise, so demanding relative agreement on near-zero gradients would fail
/// for exact backward passes. A genuinely wrong gradient still stands out by
/// orders of magnitude.
pub const REL_ERR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GroupReport {
    pub name: String,
    pub entries: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub groups: Vec<GroupReport>,
    pub max_rel_err: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_err <= tolerance
    }
}

/// Compares the analytic gradients produced by `loss_and_backward` against
/// central finite differences of `loss_only`, entry by entry, and returns the
/// worst relative error per parameter group.
///
/// Both closures must be deterministic over the same fixed input (dropout in
/// inference mode), and `loss_only` must not touch gradient accumulators.
pub fn gradient_check<M: ParamSet>(
    model: &mut M,
    mut loss_and_backward: impl FnMut(&mut M) -> Result<f64>,
    mut loss_only: impl FnMut(&mut M) -> Result<f64>,
    epsilon: f64,
) -> Result<GradCheckReport> {
    model.zero_grads();
    loss_and_backward(model)?;
    let analytic: Vec<(String, Vec<f64>)> = model
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.grad.data().to_vec()))
        .collect();

    let mut groups = Vec::with_capacity(analytic.len());
    let mut overall: f64 = 0.0;
    for (k, (name, grads)) in analytic.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for e in 0..grads.len() {
            let original = model.params_mut()[k].value.data()[e];
            model.params_mut()[k].value.data_mut()[e] = original + epsilon;
            let plus = loss_only(model)?;
            model.params_mut()[k].value.data_mut()[e] = original - epsilon;
            let minus = loss_only(model)?;
            model.params_mut()[k].value.data_mut()[e] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = grads[e];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
            if rel > worst {
                worst = rel;
            }
        }
        overall = overall.max(worst);
        groups.push(GroupReport {
            name: name.clone(),
            entries: grads.len(),
            max_rel_err: worst,
        });
    }
    model.zero_grads();
    Ok(GradCheckReport {
        groups,
        max_rel_err: overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::param::Parameter;
    use crate::nn::tensor::Tensor2;

    /// y = w . x with squared-error loss; gradient (y - t) x, optionally
    /// corrupted by a factor to prove the checker catches broken backwards.
    struct LinearModel {
        w: Parameter,
        x: Vec<f64>,
        target: f64,
        grad_scale: f64,
    }

    impl ParamSet for LinearModel {
        fn params(&self) -> Vec<&Parameter> {
            vec![&self.w]
        }
        fn params_mut(&mut self) -> Vec<&mut Parameter> {
            vec![&mut self.w]
        }
    }

    impl LinearModel {
        fn loss(&self) -> f64 {
            let pred: f64 = self
                .w
                .value
                .data()
                .iter()
                .zip(&self.x)
                .map(|(w, x)| w * x)
                .sum();
            0.5 * (pred - self.target).powi(2)
        }

        fn loss_and_backward(&mut self) -> f64 {
            let pred: f64 = self
                .w
                .value
                .data()
                .iter()
                .zip(&self.x)
                .map(|(w, x)| w * x)
                .sum();
            let d = (pred - self.target) * self.grad_scale;
            for (g, x) in self.w.grad.data_mut().iter_mut().zip(&self.x) {
                *g += d * x;
            }
            0.5 * (pred - self.target).powi(2)
        }
    }

    fn model(grad_scale: f64) -> LinearModel {
        LinearModel {
            w: Parameter::new("w", Tensor2::from_rows(&[vec![0.3, -0.8, 1.1]])),
            x: vec![0.5, 2.0, -1.0],
            target: 0.7,
            grad_scale,
        }
    }

    #[test]
    fn exact_for_linear_model_with_quadratic_loss() {
        let mut m = model(1.0);
        let report = gradient_check(
            &mut m,
            |m| Ok(m.loss_and_backward()),
            |m| Ok(m.loss()),
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_err < 1e-7, "rel err {}", report.max_rel_err);
    }

    #[test]
    fn detects_a_doubled_gradient() {
        let mut m = model(2.0);
        let report = gradient_check(
            &mut m,
            |m| Ok(m.loss_and_backward()),
            |m| Ok(m.loss()),
            1e-5,
        )
        .unwrap();
        assert!(
            (report.max_rel_err - 0.5).abs() < 1e-3,
            "expected ~0.5, got {}",
            report.max_rel_err
        );
    }
}
