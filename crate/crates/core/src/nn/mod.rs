//! Minimal neural-network engine: tensors, layers with hand-written backward
//! passes, losses, RMSProp and a finite-difference gradient checker.

pub mod conv1d;
pub mod dense;
pub mod dropout;
pub mod embedding;
pub mod gradcheck;
pub mod gru;
pub mod init;
pub mod loss;
pub mod maxout;
pub mod param;
pub mod rmsprop;
pub mod tensor;

pub use conv1d::Conv1d;
pub use dense::{sigmoid, softmax_rows, Activation, Dense};
pub use dropout::{dropout_apply, dropout_backward, DropoutMask, DropoutMode};
pub use embedding::{embedding_backward, embedding_forward, Embedding};
pub use gradcheck::{
    gradient_check, GradCheckReport, DEFAULT_EPSILON, REL_ERR_FLOOR, REL_ERR_TOLERANCE,
};
pub use gru::Gru;
pub use loss::{binary_cross_entropy_loss, cross_entropy_loss, BinaryCrossEntropy, CrossEntropy};
pub use maxout::{Maxout, MaxoutPiece};
pub use param::{ParamSet, Parameter};
pub use rmsprop::{rmsprop_step, RmsPropConfig};
pub use tensor::Tensor2;

#[cfg(test)]
mod fd_tests {
    //! Finite-difference checks for every layer's analytic gradients, at
    //! randomly sampled non-degenerate points. The loss is a fixed linear
    //! readout of the layer output, so the numeric side exercises nothing but
    //! the forward pass.

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::gradcheck::gradient_check;
    use super::init::{glorot_uniform, uniform};
    use super::param::{ParamSet, Parameter};
    use super::tensor::Tensor2;
    use super::*;

    const TOL: f64 = 1e-4;
    const EPS: f64 = 1e-5;

    fn readout(out: &Tensor2, coeffs: &Tensor2) -> f64 {
        out.data()
            .iter()
            .zip(coeffs.data())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Checks the input gradient of `backward` against finite differences of
    /// the forward-readout loss.
    fn assert_input_grad_close(
        analytic: &Tensor2,
        input: &Tensor2,
        mut loss_at: impl FnMut(&Tensor2) -> f64,
    ) {
        let mut perturbed = input.clone();
        for e in 0..input.len() {
            let original = perturbed.data()[e];
            perturbed.data_mut()[e] = original + EPS;
            let plus = loss_at(&perturbed);
            perturbed.data_mut()[e] = original - EPS;
            let minus = loss_at(&perturbed);
            perturbed.data_mut()[e] = original;
            let numeric = (plus - minus) / (2.0 * EPS);
            let a = analytic.data()[e];
            let rel = (a - numeric).abs()
                / a.abs()
                    .max(numeric.abs())
                    .max(super::gradcheck::REL_ERR_FLOOR);
            assert!(
                rel <= TOL,
                "input entry {e}: analytic {a} vs numeric {numeric}"
            );
        }
    }

    struct ConvUnderTest {
        layer: Conv1d,
        input: Tensor2,
        coeffs: Tensor2,
    }

    impl ParamSet for ConvUnderTest {
        fn params(&self) -> Vec<&Parameter> {
            vec![&self.layer.kernel, &self.layer.bias]
        }
        fn params_mut(&mut self) -> Vec<&mut Parameter> {
            vec![&mut self.layer.kernel, &mut self.layer.bias]
        }
    }

    #[test]
    fn conv1d_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for rows in [1usize, 4] {
            let kernel = glorot_uniform(3, 2 * 3, &mut rng);
            let bias = uniform(3, 1, -0.1, 0.1, &mut rng);
            let input = uniform(rows, 2, -1.0, 1.0, &mut rng);
            let coeffs = uniform(rows, 3, -1.0, 1.0, &mut rng);
            let mut m = ConvUnderTest {
                layer: Conv1d::new(
                    Parameter::new("kernel", kernel),
                    Parameter::new("bias", bias),
                    3,
                ),
                input,
                coeffs,
            };
            let report = gradient_check(
                &mut m,
                |m| {
                    let (out, ctx) = m.layer.forward(&m.input)?;
                    m.layer.backward(&ctx, &m.coeffs);
                    Ok(readout(&out, &m.coeffs))
                },
                |m| Ok(readout(&m.layer.forward(&m.input)?.0, &m.coeffs)),
                EPS,
            )
            .unwrap();
            assert!(
                report.max_rel_err <= TOL,
                "rows={rows}: {}",
                report.max_rel_err
            );

            // Input gradient from the same backward pass.
            let (_, ctx) = m.layer.forward(&m.input).unwrap();
            m.zero_grads();
            let grad_in = m.layer.backward(&ctx, &m.coeffs);
            let layer = &m.layer;
            let coeffs = &m.coeffs;
            assert_input_grad_close(&grad_in, &m.input, |x| {
                readout(&layer.forward(x).unwrap().0, coeffs)
            });
        }
    }

    struct GruUnderTest {
        layer: Gru,
        input: Tensor2,
        coeffs: Tensor2,
    }

    impl ParamSet for GruUnderTest {
        fn params(&self) -> Vec<&Parameter> {
            self.layer.params()
        }
        fn params_mut(&mut self) -> Vec<&mut Parameter> {
            self.layer.params_mut()
        }
    }

    #[test]
    fn gru_gradients_match_finite_differences() {
        // Random 3-step, 2-unit GRU over 3-dim inputs; every one of the nine
        // parameters plus the input is checked.
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let p = |name: &str, r: usize, c: usize, rng: &mut ChaCha8Rng| {
            Parameter::new(name, uniform(r, c, -0.8, 0.8, rng))
        };
        let layer = Gru::new(
            p("w_z", 2, 3, &mut rng),
            p("u_z", 2, 2, &mut rng),
            p("b_z", 2, 1, &mut rng),
            p("w_r", 2, 3, &mut rng),
            p("u_r", 2, 2, &mut rng),
            p("b_r", 2, 1, &mut rng),
            p("w_h", 2, 3, &mut rng),
            p("u_h", 2, 2, &mut rng),
            p("b_h", 2, 1, &mut rng),
        );
        let input = uniform(3, 3, -1.0, 1.0, &mut rng);
        let coeffs = uniform(3, 2, -1.0, 1.0, &mut rng);
        let mut m = GruUnderTest {
            layer,
            input,
            coeffs,
        };
        let report = gradient_check(
            &mut m,
            |m| {
                let (out, ctx) = m.layer.forward(&m.input)?;
                m.layer.backward(&ctx, &m.coeffs);
                Ok(readout(&out, &m.coeffs))
            },
            |m| Ok(readout(&m.layer.forward(&m.input)?.0, &m.coeffs)),
            EPS,
        )
        .unwrap();
        assert!(report.max_rel_err <= TOL, "{}", report.max_rel_err);
        assert_eq!(report.groups.len(), 9);

        let (_, ctx) = m.layer.forward(&m.input).unwrap();
        m.zero_grads();
        let grad_in = m.layer.backward(&ctx, &m.coeffs);
        let layer = &m.layer;
        let coeffs = &m.coeffs;
        assert_input_grad_close(&grad_in, &m.input, |x| {
            readout(&layer.forward(x).unwrap().0, coeffs)
        });
    }

    struct DenseUnderTest {
        layer: Dense,
        input: Tensor2,
        coeffs: Tensor2,
    }

    impl ParamSet for DenseUnderTest {
        fn params(&self) -> Vec<&Parameter> {
            vec![&self.layer.weights, &self.layer.bias]
        }
        fn params_mut(&mut self) -> Vec<&mut Parameter> {
            vec![&mut self.layer.weights, &mut self.layer.bias]
        }
    }

    #[test]
    fn dense_gradients_match_finite_differences_for_all_activations() {
        for (seed, activation) in [
            (1u64, Activation::Identity),
            (2, Activation::Relu),
            (3, Activation::SoftmaxRows),
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = DenseUnderTest {
                layer: Dense::new(
                    Parameter::new("w", glorot_uniform(3, 4, &mut rng)),
                    Parameter::new("b", uniform(3, 1, -0.2, 0.2, &mut rng)),
                    activation,
                ),
                input: uniform(2, 4, -1.0, 1.0, &mut rng),
                coeffs: uniform(2, 3, -1.0, 1.0, &mut rng),
            };
            let report = gradient_check(
                &mut m,
                |m| {
                    let (out, ctx) = m.layer.forward(&m.input)?;
                    m.layer.backward(&ctx, &m.coeffs);
                    Ok(readout(&out, &m.coeffs))
                },
                |m| Ok(readout(&m.layer.forward(&m.input)?.0, &m.coeffs)),
                EPS,
            )
            .unwrap();
            assert!(
                report.max_rel_err <= TOL,
                "{activation:?}: {}",
                report.max_rel_err
            );
        }
    }

    struct MaxoutUnderTest {
        layer: Maxout,
        input: Tensor2,
        coeffs: Tensor2,
    }

    impl ParamSet for MaxoutUnderTest {
        fn params(&self) -> Vec<&Parameter> {
            self.layer
                .pieces
                .iter()
                .flat_map(|p| [&p.weights, &p.bias])
                .collect()
        }
        fn params_mut(&mut self) -> Vec<&mut Parameter> {
            self.layer
                .pieces
                .iter_mut()
                .flat_map(|p| [&mut p.weights, &mut p.bias])
                .collect()
        }
    }

    #[test]
    fn maxout_gradients_match_finite_differences_away_from_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let piece = |name: &str, rng: &mut ChaCha8Rng| MaxoutPiece {
            weights: Parameter::new(format!("{name}.w"), glorot_uniform(3, 4, rng)),
            bias: Parameter::new(format!("{name}.b"), uniform(3, 1, -0.5, 0.5, rng)),
        };
        let mut m = MaxoutUnderTest {
            layer: Maxout::new(vec![piece("p0", &mut rng), piece("p1", &mut rng)]),
            input: uniform(2, 4, -1.0, 1.0, &mut rng),
            coeffs: uniform(2, 3, -1.0, 1.0, &mut rng),
        };
        let report = gradient_check(
            &mut m,
            |m| {
                let (out, ctx) = m.layer.forward(&m.input)?;
                m.layer.backward(&ctx, &m.coeffs);
                Ok(readout(&out, &m.coeffs))
            },
            |m| Ok(readout(&m.layer.forward(&m.input)?.0, &m.coeffs)),
            EPS,
        )
        .unwrap();
        assert!(report.max_rel_err <= TOL, "{}", report.max_rel_err);
    }

    #[test]
    fn fused_cross_entropy_logit_gradient_matches_finite_differences() {
        // Loss as a function of raw logits: softmax then cross-entropy. The
        // fused gradient (p - onehot)/N must match the numeric derivative.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let logits = uniform(3, 4, -2.0, 2.0, &mut rng);
        let targets = [2usize, 0, 3];
        let loss_at = |l: &Tensor2| cross_entropy_loss(&softmax_rows(l), &targets).unwrap().loss;
        let ce = cross_entropy_loss(&softmax_rows(&logits), &targets).unwrap();
        assert_input_grad_close(&ce.logit_grad, &logits, |l| loss_at(l));
    }

    #[test]
    fn fused_bce_logit_gradient_matches_finite_differences() {
        for &pre in &[-1.7_f64, 0.0, 0.4, 3.0] {
            for &target in &[true, false] {
                let bce = binary_cross_entropy_loss(sigmoid(pre), target);
                let plus = binary_cross_entropy_loss(sigmoid(pre + EPS), target).loss;
                let minus = binary_cross_entropy_loss(sigmoid(pre - EPS), target).loss;
                let numeric = (plus - minus) / (2.0 * EPS);
                assert!((bce.logit_grad - numeric).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn dropout_backward_matches_finite_differences_under_fixed_mask() {
        use rand::SeedableRng;
        let input = Tensor2::from_flat(2, 3, vec![0.5, -1.0, 2.0, 0.1, 0.0, -0.7]);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (_, mask) = dropout_apply(&input, 0.5, DropoutMode::Train, &mut rng);
        let coeffs = Tensor2::from_flat(2, 3, vec![1.0, 2.0, -1.0, 0.5, 3.0, 1.5]);
        let grad = dropout_backward(&mask, &coeffs);
        // With the mask held fixed the map is linear; replay it by scaling.
        let mut perturbed = input.clone();
        for e in 0..input.len() {
            let original = perturbed.data()[e];
            let apply = |x: &Tensor2| -> f64 {
                let mut replay = ChaCha8Rng::seed_from_u64(13);
                let (out, _) = dropout_apply(x, 0.5, DropoutMode::Train, &mut replay);
                readout(&out, &coeffs)
            };
            perturbed.data_mut()[e] = original + EPS;
            let plus = apply(&perturbed);
            perturbed.data_mut()[e] = original - EPS;
            let minus = apply(&perturbed);
            perturbed.data_mut()[e] = original;
            let numeric = (plus - minus) / (2.0 * EPS);
            assert!((grad.data()[e] - numeric).abs() < 1e-8);
        }
    }
}
