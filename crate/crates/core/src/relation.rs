//! Pairwise aspect-opinion relation extraction.
//!
//! Candidate pairs are the Cartesian product of a review's aspect and
//! opinion spans, filtered to pairs at most 20 words apart. Each surviving
//! pair is encoded as a 20-token window centered between the two terms, with
//! separate distance embeddings relative to the aspect and to the opinion,
//! and classified by a GRU + maxout network with one sigmoid output. A
//! probability above 0.5 asserts the relation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Review;
use crate::error::{Error, Result};
use crate::features::{
    extract_window, relative_distances, DistanceIndexer, FeatureIndices, HyperParams, PosTagSet,
    Vocabulary,
};
use crate::iob2::Span;
use crate::nn::{
    binary_cross_entropy_loss, rmsprop_step, sigmoid, ParamSet, Parameter, RmsPropConfig, Tensor2,
};
use crate::training::TrainTrace;
use crate::windownet::WindowNet;

pub const MAX_PAIR_GAP: usize = 20;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// A candidate aspect-opinion pair inside one review.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePair {
    pub aspect_index: usize,
    pub opinion_index: usize,
    pub aspect: Span,
    pub opinion: Span,
    /// Tokens strictly between the nearer ends; 0 for adjacent or
    /// overlapping spans.
    pub gap: usize,
}

/// Word distance between the closer ends of two spans.
pub fn span_gap(a: &Span, b: &Span) -> usize {
    if a.end <= b.start {
        b.start - a.end
    } else if b.end <= a.start {
        a.start - b.end
    } else {
        0
    }
}

/// All aspect x opinion pairs of one review that pass the distance filter.
pub fn generate_candidates(aspects: &[Span], opinions: &[Span]) -> Vec<CandidatePair> {
    let mut out = Vec::new();
    for (ai, aspect) in aspects.iter().enumerate() {
        for (oi, opinion) in opinions.iter().enumerate() {
            let gap = span_gap(aspect, opinion);
            if gap <= MAX_PAIR_GAP {
                out.push(CandidatePair {
                    aspect_index: ai,
                    opinion_index: oi,
                    aspect: *aspect,
                    opinion: *opinion,
                    gap,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct RelationModel {
    pub hp: HyperParams,
    pub vocab: Vocabulary,
    pos_tags: PosTagSet,
    indexer: DistanceIndexer,
    net: WindowNet,
}

/// One pre-encoded candidate pair with its gold label.
#[derive(Debug, Clone)]
pub struct RelationSample {
    pub features: FeatureIndices,
    pub related: bool,
}

impl RelationModel {
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
            &["aspect_dist_embed", "opinion_dist_embed"],
            hp.d_rel,
            1,
            rng,
        )?;
        Ok(RelationModel {
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

    /// Window features for one pair: word + POS sequences around the pair
    /// midpoint plus one distance sequence per term.
    pub fn build_features(
        &self,
        tokens: &[String],
        pos: &[String],
        pair: &CandidatePair,
    ) -> Result<FeatureIndices> {
        let length = tokens.len();
        let window = extract_window(length, &[pair.aspect, pair.opinion], self.hp.l_rel)?;
        let aspect_dist = relative_distances(length, &pair.aspect)?;
        let opinion_dist = relative_distances(length, &pair.opinion)?;
        let words_full = self.vocab.encode_tokens(tokens);
        let pos_full = self.pos_tags.encode_tags(pos);
        let mut words = vec![self.vocab.pad_index(); window.left_pad];
        words.extend(&words_full[window.start..window.end]);
        let mut pos_idx = vec![self.pos_tags.padding_index(); window.left_pad];
        pos_idx.extend(&pos_full[window.start..window.end]);
        let clip = |seq: &[isize]| {
            let mut out = vec![self.indexer.padding_slot(); window.left_pad];
            out.extend(
                seq[window.start..window.end]
                    .iter()
                    .map(|&d| self.indexer.index(d)),
            );
            out
        };
        Ok(FeatureIndices {
            words,
            pos: Some(pos_idx),
            distances: vec![clip(&aspect_dist), clip(&opinion_dist)],
        })
    }

    pub fn probability_from_features(&self, features: &FeatureIndices) -> Result<f64> {
        let (logits, _) = self.net.forward(features)?;
        Ok(sigmoid(logits.get(0, 0)))
    }

    /// Probability that the pair forms an aspect-opinion relation.
    pub fn classify_pair(
        &self,
        tokens: &[String],
        pos: &[String],
        pair: &CandidatePair,
    ) -> Result<f64> {
        let features = self.build_features(tokens, pos, pair)?;
        self.probability_from_features(&features)
    }

    pub fn sample_loss(&self, sample: &RelationSample) -> Result<f64> {
        let p = self.probability_from_features(&sample.features)?;
        Ok(binary_cross_entropy_loss(p, sample.related).loss)
    }

    pub fn sample_loss_backward(&mut self, sample: &RelationSample) -> Result<f64> {
        let (logits, ctx) = self.net.forward(&sample.features)?;
        let bce = binary_cross_entropy_loss(sigmoid(logits.get(0, 0)), sample.related);
        let grad = Tensor2::from_rows(&[vec![bce.logit_grad]]);
        self.net.backward(&ctx, &grad);
        Ok(bce.loss)
    }

    pub fn train_step(&mut self, sample: &RelationSample, rms: &RmsPropConfig) -> Result<f64> {
        let loss = self.sample_loss_backward(sample)?;
        for p in self.net.params_mut() {
            rmsprop_step(p, rms)?;
        }
        Ok(loss)
    }
}

impl ParamSet for RelationModel {
    fn params(&self) -> Vec<&Parameter> {
        self.net.params()
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.net.params_mut()
    }
}

#[derive(Debug, Clone)]
pub struct RelationTrainConfig {
    pub hp: HyperParams,
    pub rms: RmsPropConfig,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for RelationTrainConfig {
    fn default() -> Self {
        RelationTrainConfig {
            hp: HyperParams::default(),
            rms: RmsPropConfig::default(),
            epochs: 28,
            seed: 42,
        }
    }
}

/// Builds the training set from gold spans: every filtered candidate pair,
/// labeled positive when the gold relation set contains it. Gold relations
/// whose pair the distance filter rejected are counted as unreachable.
pub fn train_relation(
    corpus: &[Review],
    pretrained: Option<&(Vocabulary, Parameter)>,
    cfg: &RelationTrainConfig,
) -> Result<(RelationModel, TrainTrace)> {
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
        RelationModel::init(&cfg.hp, vocab, pretrained.map(|(_, p)| &p.value), &mut rng)?;
    let mut samples = Vec::new();
    let mut unreachable = 0usize;
    for review in corpus {
        let candidates = generate_candidates(&review.aspects, &review.opinions);
        for &(a, o) in &review.relations {
            let reachable = candidates
                .iter()
                .any(|c| c.aspect_index == a && c.opinion_index == o);
            if !reachable {
                unreachable += 1;
            }
        }
        for pair in candidates {
            let related = review
                .relations
                .iter()
                .any(|&(a, o)| a == pair.aspect_index && o == pair.opinion_index);
            samples.push(RelationSample {
                features: model.build_features(&review.tokens, &review.pos, &pair)?,
                related,
            });
        }
    }
    if samples.is_empty() {
        return Err(Error::Config("no candidate pairs to train on".to_string()));
    }
    let mut trace = TrainTrace {
        samples_per_epoch: samples.len(),
        unreachable_gold: unreachable,
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
                    context: format!("relation loss at epoch {epoch}, sample {i}"),
                });
            }
            total += loss;
        }
        trace.epoch_mean_loss.push(total / samples.len() as f64);
    }
    Ok((model, trace))
}

/// Fraction of gold relations whose pair survives the distance filter.
pub fn filter_recall(corpus: &[Review]) -> Option<f64> {
    let mut total = 0usize;
    let mut kept = 0usize;
    for review in corpus {
        for &(a, o) in &review.relations {
            total += 1;
            if span_gap(&review.aspects[a], &review.opinions[o]) <= MAX_PAIR_GAP {
                kept += 1;
            }
        }
    }
    (total > 0).then(|| kept as f64 / total as f64)
}

/// Classifies every candidate pair built from the given spans and keeps
/// those above the threshold. The output is always a subset of
/// [`generate_candidates`].
pub fn extract_relations(
    model: &RelationModel,
    corpus: &[Review],
    spans: &[(Vec<Span>, Vec<Span>)],
    threshold: f64,
) -> Result<Vec<Vec<CandidatePair>>> {
    assert_eq!(corpus.len(), spans.len(), "corpus/spans misalignment");
    let mut out = Vec::with_capacity(corpus.len());
    for (review, (aspects, opinions)) in corpus.iter().zip(spans) {
        let mut kept = Vec::new();
        for pair in generate_candidates(aspects, opinions) {
            let p = model.classify_pair(&review.tokens, &review.pos, &pair)?;
            if p > threshold {
                kept.push(pair);
            }
        }
        out.push(kept);
    }
    Ok(out)
}
