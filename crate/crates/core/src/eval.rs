//! Evaluation: strict span matching, sentiment accuracy, relation F1 and
//! k-fold splitting.
//!
//! A predicted span counts only when both boundaries and the role equal a
//! gold span's; relations count only on an exact (aspect span, opinion span)
//! match. Counts are pooled over all reviews of one evaluation (micro); the
//! cross-validation driver averages fold scores (macro).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::corpus::Review;
use crate::error::{Error, Result};
use crate::iob2::{SentimentLabel, Span};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: MatchCounts,
}

impl Prf {
    fn from_counts(counts: MatchCounts) -> Self {
        let tp = counts.true_positive as f64;
        let predicted = counts.true_positive + counts.false_positive;
        let gold = counts.true_positive + counts.false_negative;
        if predicted == 0 && gold == 0 {
            return Prf {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                counts,
            };
        }
        let precision = if predicted == 0 {
            0.0
        } else {
            tp / predicted as f64
        };
        let recall = if gold == 0 { 0.0 } else { tp / gold as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
            counts,
        }
    }
}

fn span_key(span: &Span) -> (usize, usize, crate::iob2::SpanRole) {
    (span.start, span.end, span.role)
}

/// Strict precision/recall/F1 over per-review aligned span lists.
pub fn strict_prf(gold: &[Vec<Span>], predicted: &[Vec<Span>]) -> Prf {
    assert_eq!(gold.len(), predicted.len(), "per-review lists must align");
    let mut counts = MatchCounts::default();
    for (g, p) in gold.iter().zip(predicted) {
        let gold_set: HashSet<_> = g.iter().map(span_key).collect();
        let pred_set: HashSet<_> = p.iter().map(span_key).collect();
        counts.true_positive += gold_set.intersection(&pred_set).count();
        counts.false_positive += pred_set.difference(&gold_set).count();
        counts.false_negative += gold_set.difference(&pred_set).count();
    }
    Prf::from_counts(counts)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Accuracy {
    pub accuracy: f64,
    pub correct: usize,
    pub incorrect: usize,
}

pub fn sentiment_accuracy(
    gold: &[SentimentLabel],
    predicted: &[SentimentLabel],
) -> Result<Accuracy> {
    if gold.len() != predicted.len() {
        return Err(Error::Shape {
            context: "sentiment accuracy".to_string(),
            expected: format!("{} predictions", gold.len()),
            actual: format!("{}", predicted.len()),
        });
    }
    let correct = gold.iter().zip(predicted).filter(|(g, p)| g == p).count();
    let incorrect = gold.len() - correct;
    let accuracy = if gold.is_empty() {
        1.0
    } else {
        correct as f64 / gold.len() as f64
    };
    Ok(Accuracy {
        accuracy,
        correct,
        incorrect,
    })
}

fn pair_key(pair: &(Span, Span)) -> ((usize, usize), (usize, usize)) {
    ((pair.0.start, pair.0.end), (pair.1.start, pair.1.end))
}

/// Set-based P/R/F1 over (aspect span, opinion span) pairs per review.
pub fn relation_prf(gold: &[Vec<(Span, Span)>], predicted: &[Vec<(Span, Span)>]) -> Prf {
    assert_eq!(gold.len(), predicted.len(), "per-review lists must align");
    let mut counts = MatchCounts::default();
    for (g, p) in gold.iter().zip(predicted) {
        let gold_set: HashSet<_> = g.iter().map(pair_key).collect();
        let pred_set: HashSet<_> = p.iter().map(pair_key).collect();
        counts.true_positive += gold_set.intersection(&pred_set).count();
        counts.false_positive += pred_set.difference(&gold_set).count();
        counts.false_negative += gold_set.difference(&pred_set).count();
    }
    Prf::from_counts(counts)
}

/// Seeded k-fold plan: reviews are shuffled, then dealt round-robin so fold
/// sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Review id -> fold index, in corpus order.
    pub assignment: Vec<(String, usize)>,
}

pub fn kfold(corpus: &[Review], k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 || k > corpus.len() {
        return Err(Error::Config(format!(
            "k = {k} is invalid for a corpus of {} reviews",
            corpus.len()
        )));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut folds = vec![0usize; corpus.len()];
    for (deal, &position) in order.iter().enumerate() {
        folds[position] = deal % k;
    }
    Ok(FoldPlan {
        k,
        seed,
        assignment: corpus
            .iter()
            .zip(&folds)
            .map(|(r, &f)| (r.id.clone(), f))
            .collect(),
    })
}

impl FoldPlan {
    /// (train, test) views of the corpus for one fold. The corpus must be the
    /// one the plan was built from, in the same order.
    pub fn split<'a>(
        &self,
        corpus: &'a [Review],
        fold: usize,
    ) -> (Vec<&'a Review>, Vec<&'a Review>) {
        assert!(fold < self.k, "fold {fold} out of range");
        assert_eq!(corpus.len(), self.assignment.len(), "corpus/plan mismatch");
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (review, (id, f)) in corpus.iter().zip(&self.assignment) {
            assert_eq!(&review.id, id, "corpus/plan id mismatch");
            if *f == fold {
                test.push(review);
            } else {
                train.push(review);
            }
        }
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for (_, f) in &self.assignment {
            sizes[*f] += 1;
        }
        sizes
    }
}
