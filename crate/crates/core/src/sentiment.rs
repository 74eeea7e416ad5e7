//! Opinion-term-specific sentiment classification.
//!
//! For each given opinion term, a 20-token window around it is encoded as
//! word embedding + POS one-hot + distance embedding per position; a GRU
//! reads the window, and two maxout layers map its final hidden state to
//! four sentiment probabilities. Other opinion annotations in the same
//! sentence play no role: the features depend only on the one focus span.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Review;
use crate::error::{Error, Result};
use crate::features::{
    extract_window, relative_distances, DistanceIndexer, FeatureIndices, HyperParams, PosTagSet,
    Vocabulary,
};
pub use crate::iob2::SentimentLabel;
use crate::iob2::Span;
use crate::nn::dense::softmax_in_place;
use crate::nn::{cross_entropy_loss, rmsprop_step, ParamSet, Parameter, RmsPropConfig, Tensor2};
use crate::training::TrainTrace;
use crate::windownet::WindowNet;

#[derive(Debug, Clone)]
pub struct SentimentModel {
    pub hp: HyperParams,
    pub vocab: Vocabulary,
    pos_tags: PosTagSet,
    indexer: DistanceIndexer,
    net: WindowNet,
}

/// One pre-encoded (review, opinion) training pair.
#[derive(Debug, Clone)]
pub struct SentimentSample {
    pub features: FeatureIndices,
    pub label: SentimentLabel,
}

impl SentimentModel {
    pub fn init(
        hp: &HyperParams,
        vocab: Vocabulary,
        pretrained_table: Option<&Tensor2>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let net = WindowNet::init(
            hp,
            vocab.len(),
            vocab.pad_index(),
            pretrained_table,
            &["dist_embed"],
            hp.d_pol,
            SentimentLabel::COUNT,
            rng,
        )?;
        Ok(SentimentModel {
            hp: *hp,
            vocab,
            pos_tags: PosTagSet::new(),
            indexer: DistanceIndexer::default(),
            net,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Window features for one opinion span. Only the focus span matters;
    /// any other annotation of the review is ignored by construction.
    pub fn build_features(
        &self,
        tokens: &[String],
        pos: &[String],
        opinion: &Span,
    ) -> Result<FeatureIndices> {
        let length = tokens.len();
        let window = extract_window(length, &[*opinion], self.hp.l_pol)?;
        let distances = relative_distances(length, opinion)?;
        let words_full = self.vocab.encode_tokens(tokens);
        let pos_full = self.pos_tags.encode_tags(pos);
        let mut words = vec![self.vocab.pad_index(); window.left_pad];
        words.extend(&words_full[window.start..window.end]);
        let mut pos_idx = vec![self.pos_tags.padding_index(); window.left_pad];
        pos_idx.extend(&pos_full[window.start..window.end]);
        let mut dist = vec![self.indexer.padding_slot(); window.left_pad];
        dist.extend(
            distances[window.start..window.end]
                .iter()
                .map(|&d| self.indexer.index(d)),
        );
        Ok(FeatureIndices {
            words,
            pos: Some(pos_idx),
            distances: vec![dist],
        })
    }

    pub fn probabilities(&self, features: &FeatureIndices) -> Result<[f64; 4]> {
        let (logits, _) = self.net.forward(features)?;
        let mut row = [0.0; 4];
        row.copy_from_slice(logits.row(0));
        softmax_in_place(&mut row);
        Ok(row)
    }

    /// Classifies one opinion term; ties resolve in label order
    /// positive, neutral, negative, unknown.
    pub fn classify_opinion(
        &self,
        tokens: &[String],
        pos: &[String],
        opinion: &Span,
    ) -> Result<(SentimentLabel, [f64; 4])> {
        let features = self.build_features(tokens, pos, opinion)?;
        let probs = self.probabilities(&features)?;
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        Ok((SentimentLabel::from_index(best).unwrap(), probs))
    }

    pub fn sample_loss(&self, sample: &SentimentSample) -> Result<f64> {
        let (logits, _) = self.net.forward(&sample.features)?;
        let probs = crate::nn::softmax_rows(&logits);
        Ok(cross_entropy_loss(&probs, &[sample.label.index()])?.loss)
    }

    pub fn sample_loss_backward(&mut self, sample: &SentimentSample) -> Result<f64> {
        let (logits, ctx) = self.net.forward(&sample.features)?;
        let probs = crate::nn::softmax_rows(&logits);
        let ce = cross_entropy_loss(&probs, &[sample.label.index()])?;
        self.net.backward(&ctx, &ce.logit_grad);
        Ok(ce.loss)
    }

    pub fn train_step(&mut self, sample: &SentimentSample, rms: &RmsPropConfig) -> Result<f64> {
        let loss = self.sample_loss_backward(sample)?;
        for p in self.net.params_mut() {
            rmsprop_step(p, rms)?;
        }
        Ok(loss)
    }
}

impl ParamSet for SentimentModel {
    fn params(&self) -> Vec<&Parameter> {
        self.net.params()
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.net.params_mut()
    }
}

#[derive(Debug, Clone)]
pub struct SentimentTrainConfig {
    pub hp: HyperParams,
    pub rms: RmsPropConfig,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SentimentTrainConfig {
    fn default() -> Self {
        SentimentTrainConfig {
            hp: HyperParams::default(),
            rms: RmsPropConfig::default(),
            epochs: 14,
            seed: 42,
        }
    }
}

/// Trains on every (review, gold opinion) pair; each opinion must carry a
/// gold sentiment label.
pub fn train_sentiment(
    corpus: &[Review],
    pretrained: Option<&(Vocabulary, Parameter)>,
    cfg: &SentimentTrainConfig,
) -> Result<(SentimentModel, TrainTrace)> {
    cfg.rms.validate()?;
    let vocab = match pretrained {
        Some((v, _)) => v.clone(),
        None => Vocabulary::from_tokens(
            corpus
                .iter()
                .flat_map(|r| r.tokens.iter().map(String::as_str)),
        ),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model =
        SentimentModel::init(&cfg.hp, vocab, pretrained.map(|(_, p)| &p.value), &mut rng)?;
    let mut samples = Vec::new();
    for review in corpus {
        for opinion in &review.opinions {
            let label = opinion.sentiment.ok_or_else(|| {
                Error::Config(format!(
                    "opinion [{}, {}) in review '{}' has no gold sentiment label",
                    opinion.start, opinion.end, review.id
                ))
            })?;
            samples.push(SentimentSample {
                features: model.build_features(&review.tokens, &review.pos, opinion)?,
                label,
            });
        }
    }
    if samples.is_empty() {
        return Err(Error::Config(
            "no labeled opinion terms to train on".to_string(),
        ));
    }
    let mut trace = TrainTrace {
        samples_per_epoch: samples.len(),
        ..TrainTrace::default()
    };
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let loss = model.train_step(&samples[i], &cfg.rms)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("sentiment loss at epoch {epoch}, sample {i}"),
                });
            }
            total += loss;
        }
        trace.epoch_mean_loss.push(total / samples.len() as f64);
    }
    Ok((model, trace))
}

/// The naive baseline: every opinion is labeled positive. Its accuracy on a
/// corpus equals the corpus's positive-label frequency by construction.
pub fn majority_baseline(corpus: &[Review]) -> Vec<SentimentLabel> {
    corpus
        .iter()
        .flat_map(|r| r.opinions.iter().map(|_| SentimentLabel::Positive))
        .collect()
}

/// Gold labels flattened in the same (review, opinion) order the baseline
/// and the classifier use.
pub fn gold_labels(corpus: &[Review]) -> Result<Vec<SentimentLabel>> {
    let mut out = Vec::new();
    for review in corpus {
        for opinion in &review.opinions {
            out.push(opinion.sentiment.ok_or_else(|| {
                Error::Config(format!(
                    "opinion [{}, {}) in review '{}' has no gold sentiment label",
                    opinion.start, opinion.end, review.id
                ))
            })?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::sentiment_accuracy;
    use crate::iob2::SpanRole;

    fn tiny_hp() -> HyperParams {
        HyperParams {
            d_word: 8,
            d_pos: PosTagSet::WIDTH,
            d_dist: 3,
            d_conv: 4,
            l_conv: 3,
            d_gru: 6,
            d_pol: 6,
            d_rel: 6,
            l_pol: 8,
            l_rel: 8,
            dropout: 0.0,
        }
    }

    fn opinion(start: usize, end: usize, label: SentimentLabel) -> Span {
        Span::new(start, end, SpanRole::Opinion).with_sentiment(label)
    }

    fn review(id: &str, text: &str, opinions: Vec<Span>) -> Review {
        let tokens: Vec<String> = text.split_whitespace().map(String::from).collect();
        let pos = vec!["NN".to_string(); tokens.len()];
        Review {
            id: id.to_string(),
            tokens,
            pos,
            aspects: vec![],
            opinions,
            relations: vec![],
        }
    }

    fn four_label_corpus() -> Vec<Review> {
        use SentimentLabel::*;
        vec![
            review(
                "r1",
                "the coffee stays fresh all day",
                vec![opinion(3, 4, Positive)],
            ),
            review("r2", "this blade is awful", vec![opinion(3, 4, Negative)]),
            review(
                "r3",
                "an average screen overall",
                vec![opinion(1, 2, Neutral)],
            ),
            review(
                "r4",
                "a rather different handle",
                vec![opinion(2, 3, Unknown)],
            ),
        ]
    }

    fn cfg(epochs: usize) -> SentimentTrainConfig {
        SentimentTrainConfig {
            hp: tiny_hp(),
            epochs,
            seed: 11,
            ..SentimentTrainConfig::default()
        }
    }

    #[test]
    fn window_features_follow_the_distance_example() {
        // "Coffee stays fresh and hot in the Carafe" with focus "stays
        // fresh": distances -1 0 0 1 2 3 4 5, left-padded to the window.
        let corpus = vec![review(
            "r1",
            "coffee stays fresh and hot in the carafe",
            vec![opinion(1, 3, SentimentLabel::Positive)],
        )];
        let (model, _) = train_sentiment(&corpus, None, &cfg(0)).unwrap();
        let r = &corpus[0];
        let feats = model
            .build_features(&r.tokens, &r.pos, &r.opinions[0])
            .unwrap();
        assert_eq!(feats.len(), 8); // l_pol = 8 in the tiny config, text len 8
        let indexer = DistanceIndexer::default();
        let expected: Vec<usize> = [-1i64, 0, 0, 1, 2, 3, 4, 5]
            .iter()
            .map(|&d| indexer.index(d as isize))
            .collect();
        assert_eq!(feats.distances[0], expected);
    }

    #[test]
    fn short_text_is_left_padded() {
        let corpus = vec![review(
            "r1",
            "simply great",
            vec![opinion(1, 2, SentimentLabel::Positive)],
        )];
        let (model, _) = train_sentiment(&corpus, None, &cfg(0)).unwrap();
        let r = &corpus[0];
        let feats = model
            .build_features(&r.tokens, &r.pos, &r.opinions[0])
            .unwrap();
        assert_eq!(feats.len(), 8);
        assert_eq!(&feats.words[..6], &vec![model.vocab.pad_index(); 6][..]);
        assert_eq!(&feats.distances[0][..6], &vec![41usize; 6][..]);
    }

    #[test]
    fn zeroed_output_layer_gives_uniform_and_positive_tie() {
        let corpus = four_label_corpus();
        let (mut model, _) = train_sentiment(&corpus, None, &cfg(0)).unwrap();
        for p in model.params_mut() {
            if p.name.starts_with("output.") {
                p.value.fill(0.0);
            }
        }
        let r = &corpus[1];
        let (label, probs) = model
            .classify_opinion(&r.tokens, &r.pos, &r.opinions[0])
            .unwrap();
        for p in probs {
            assert!((p - 0.25).abs() < 1e-12);
        }
        assert_eq!(label, SentimentLabel::Positive);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let corpus = four_label_corpus();
        let (model, _) = train_sentiment(&corpus, None, &cfg(2)).unwrap();
        let r = &corpus[0];
        let (_, probs) = model
            .classify_opinion(&r.tokens, &r.pos, &r.opinions[0])
            .unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn features_ignore_other_opinion_annotations() {
        // The classification of one opinion must not depend on whether other
        // gold opinions exist in the same sentence.
        let with_two = review(
            "r1",
            "coffee stays fresh and hot in the carafe",
            vec![
                opinion(1, 3, SentimentLabel::Positive),
                opinion(4, 5, SentimentLabel::Positive),
            ],
        );
        let with_one = review(
            "r2",
            "coffee stays fresh and hot in the carafe",
            vec![opinion(1, 3, SentimentLabel::Positive)],
        );
        let (model, _) = train_sentiment(&[with_one.clone()], None, &cfg(0)).unwrap();
        let a = model
            .build_features(&with_two.tokens, &with_two.pos, &with_two.opinions[0])
            .unwrap();
        let b = model
            .build_features(&with_one.tokens, &with_one.pos, &with_one.opinions[0])
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_epochs_is_deterministic_initialization() {
        let corpus = four_label_corpus();
        let (a, trace) = train_sentiment(&corpus, None, &cfg(0)).unwrap();
        let (b, _) = train_sentiment(&corpus, None, &cfg(0)).unwrap();
        assert!(trace.epoch_mean_loss.is_empty());
        for (pa, pb) in a.params().iter().zip(b.params()) {
            assert_eq!(pa.value, pb.value, "{}", pa.name);
        }
    }

    #[test]
    fn fixed_seed_reproduces_the_trace() {
        let corpus = four_label_corpus();
        let (_, t1) = train_sentiment(&corpus, None, &cfg(3)).unwrap();
        let (_, t2) = train_sentiment(&corpus, None, &cfg(3)).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn single_pair_loss_descends() {
        let corpus = vec![review(
            "r1",
            "the coffee stays fresh",
            vec![opinion(3, 4, SentimentLabel::Positive)],
        )];
        let (_, trace) = train_sentiment(&corpus, None, &cfg(50)).unwrap();
        let losses = &trace.epoch_mean_loss;
        for pair in losses.windows(2) {
            assert!(pair[1] <= pair[0] * 1.05, "{} -> {}", pair[0], pair[1]);
        }
        assert!(losses[49] < losses[0]);
    }

    #[test]
    fn unlabeled_training_opinion_is_a_fault() {
        let bad = review(
            "r1",
            "plain text here",
            vec![Span::new(0, 1, SpanRole::Opinion)],
        );
        assert!(train_sentiment(&[bad], None, &cfg(1)).is_err());
    }

    #[test]
    fn overfit_recovers_each_gold_label() {
        let corpus = four_label_corpus();
        let (model, _) = train_sentiment(&corpus, None, &cfg(150)).unwrap();
        for r in &corpus {
            let (label, _) = model
                .classify_opinion(&r.tokens, &r.pos, &r.opinions[0])
                .unwrap();
            assert_eq!(label, r.opinions[0].sentiment.unwrap(), "review {}", r.id);
        }
    }

    #[test]
    fn baseline_is_always_positive_and_scores_the_frequency() {
        let corpus = four_label_corpus();
        let baseline = majority_baseline(&corpus);
        assert_eq!(baseline, vec![SentimentLabel::Positive; 4]);
        let gold = gold_labels(&corpus).unwrap();
        let acc = sentiment_accuracy(&gold, &baseline).unwrap();
        assert_eq!(acc.accuracy, 0.25);
        assert!(majority_baseline(&[]).is_empty());
    }
}
