//! Shared training bookkeeping.

use serde::{Deserialize, Serialize};

/// Per-run record returned by every trainer. Losses are the mean per-sample
/// training loss of each epoch, in order; identical seeds must reproduce the
/// trace bit for bit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epoch_mean_loss: Vec<f64>,
    pub samples_per_epoch: usize,
    /// Gold relations whose candidate pair was rejected by the distance
    /// filter and therefore never seen in training. Zero for the tagger and
    /// sentiment stages.
    pub unreachable_gold: usize,
}
