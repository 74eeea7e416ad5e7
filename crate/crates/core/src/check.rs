//! Whole-model gradient verification.
//!
//! Builds a seeded tiny instance of any model kind, runs one deterministic
//! forward/backward on a fixed sample and compares every parameter gradient
//! against central finite differences. Used by the `gradcheck` CLI command
//! and the acceptance suite.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Review;
use crate::error::{Error, Result};
use crate::features::{HyperParams, PosTagSet, Vocabulary};
use crate::iob2::{SentimentLabel, Span, SpanRole};
use crate::nn::{gradient_check, GradCheckReport, DEFAULT_EPSILON};
use crate::relation::{generate_candidates, RelationModel, RelationSample};
use crate::sentiment::{SentimentModel, SentimentSample};
use crate::tagger::{ArchRegistry, TaggerModel};

pub const CHECKABLE_KINDS: [&str; 7] = [
    "cnn",
    "rnn",
    "stacked",
    "joint-small",
    "joint-large",
    "sentiment",
    "relation",
];

/// Small sizes so the finite-difference sweep stays fast; the layer wiring
/// is identical to the full configuration.
fn tiny_hp() -> HyperParams {
    HyperParams {
        d_word: 6,
        d_pos: PosTagSet::WIDTH,
        d_dist: 3,
        d_conv: 4,
        l_conv: 3,
        d_gru: 4,
        d_pol: 4,
        d_rel: 4,
        l_pol: 8,
        l_rel: 8,
        dropout: 0.5, // inactive: the checker runs with dropout in inference mode
    }
}

fn fixture_review() -> Review {
    let tokens: Vec<String> = ["the", "battery", "life", "is", "great"]
        .map(String::from)
        .to_vec();
    let pos: Vec<String> = ["DT", "NN", "NN", "VBZ", "JJ"].map(String::from).to_vec();
    Review {
        id: "gradcheck".to_string(),
        tokens,
        pos,
        aspects: vec![Span::new(1, 3, SpanRole::Aspect)],
        opinions: vec![Span::new(4, 5, SpanRole::Opinion).with_sentiment(SentimentLabel::Negative)],
        relations: vec![(0, 0)],
    }
}

fn fixture_vocab(review: &Review) -> Vocabulary {
    Vocabulary::from_tokens(review.tokens.iter().map(String::as_str))
}

/// Runs the finite-difference check for one model kind on a seeded tiny
/// instance; the report carries one entry per named parameter group.
pub fn gradcheck_by_kind(kind: &str, seed: u64) -> Result<GradCheckReport> {
    let hp = tiny_hp();
    let review = fixture_review();
    let vocab = fixture_vocab(&review);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        "sentiment" => {
            let mut model = SentimentModel::init(&hp, vocab, None, &mut rng)?;
            let sample = SentimentSample {
                features: model.build_features(&review.tokens, &review.pos, &review.opinions[0])?,
                label: SentimentLabel::Negative,
            };
            gradient_check(
                &mut model,
                |m| m.sample_loss_backward(&sample),
                |m| m.sample_loss(&sample),
                DEFAULT_EPSILON,
            )
        }
        "relation" => {
            let mut model = RelationModel::init(&hp, vocab, None, &mut rng)?;
            let pair = generate_candidates(&review.aspects, &review.opinions)
                .into_iter()
                .next()
                .expect("fixture pair");
            let sample = RelationSample {
                features: model.build_features(&review.tokens, &review.pos, &pair)?,
                related: true,
            };
            gradient_check(
                &mut model,
                |m| m.sample_loss_backward(&sample),
                |m| m.sample_loss(&sample),
                DEFAULT_EPSILON,
            )
        }
        tagger_kind => {
            let registry = ArchRegistry::standard();
            let arch = registry.resolve(tagger_kind)?;
            let mut model =
                TaggerModel::init(arch, &hp, arch.default_use_pos(), vocab, None, &mut rng)?;
            let sample = model.encode_sample(&review)?;
            gradient_check(
                &mut model,
                |m| m.sample_loss_backward(&sample),
                |m| m.sample_loss(&sample),
                DEFAULT_EPSILON,
            )
        }
    }
}

/// Checks all kinds; returns per-kind reports in [`CHECKABLE_KINDS`] order.
pub fn gradcheck_all(seed: u64) -> Result<Vec<(String, GradCheckReport)>> {
    CHECKABLE_KINDS
        .iter()
        .map(|kind| Ok((kind.to_string(), gradcheck_by_kind(kind, seed)?)))
        .collect()
}

/// Convenience for error paths: unknown kinds fault early.
pub fn validate_kind(kind: &str) -> Result<()> {
    if CHECKABLE_KINDS.contains(&kind) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "unknown model kind '{kind}'; available: {}",
            CHECKABLE_KINDS.join(", ")
        )))
    }
}
