//! Per-token input features: word embeddings, POS one-hots, learned distance
//! embeddings and the windowing logic shared by the sentiment and relation
//! components.

pub mod vocab;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iob2::Span;
use crate::nn::{embedding_backward, embedding_forward, Parameter, Tensor2};

pub use vocab::{load_embeddings, PosTagSet, Vocabulary, PAD_TOKEN, PTB_TAGS, UNK_TOKEN};

/// Network sizes. Defaults follow the reference configuration; tests shrink
/// them for fast gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub d_word: usize,
    pub d_pos: usize,
    pub d_dist: usize,
    pub d_conv: usize,
    pub l_conv: usize,
    pub d_gru: usize,
    pub d_pol: usize,
    pub d_rel: usize,
    pub l_pol: usize,
    pub l_rel: usize,
    pub dropout: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            d_word: 100,
            d_pos: PosTagSet::WIDTH,
            d_dist: 10,
            d_conv: 50,
            l_conv: 3,
            d_gru: 100,
            d_pol: 100,
            d_rel: 100,
            l_pol: 20,
            l_rel: 20,
            dropout: 0.5,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.d_word,
            self.d_pos,
            self.d_dist,
            self.d_conv,
            self.l_conv,
            self.d_gru,
            self.d_pol,
            self.d_rel,
            self.l_pol,
            self.l_rel,
        ];
        if positive.contains(&0) {
            return Err(Error::Config("all layer sizes must be positive".into()));
        }
        if self.l_conv % 2 == 0 {
            return Err(Error::Config("l_conv must be odd".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Maps signed token distances into a fixed embedding table: distances are
/// clamped to `[-clip_radius, clip_radius]`, giving `2 * clip_radius + 1`
/// regular slots plus one padding slot at the end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceIndexer {
    pub clip_radius: usize,
}

impl Default for DistanceIndexer {
    fn default() -> Self {
        DistanceIndexer { clip_radius: 20 }
    }
}

impl DistanceIndexer {
    pub fn table_size(&self) -> usize {
        2 * self.clip_radius + 2
    }

    pub fn padding_slot(&self) -> usize {
        2 * self.clip_radius + 1
    }

    pub fn index(&self, distance: isize) -> usize {
        let r = self.clip_radius as isize;
        (distance.clamp(-r, r) + r) as usize
    }
}

/// Signed distance of every token to a focus span: 0 inside the span,
/// -1 immediately left of it, +1 immediately right.
pub fn relative_distances(length: usize, span: &Span) -> Result<Vec<isize>> {
    span.validate(length)?;
    let mut out = Vec::with_capacity(length);
    for i in 0..length {
        let d = if i < span.start {
            i as isize - span.start as isize
        } else if i >= span.end {
            i as isize - (span.end as isize - 1)
        } else {
            0
        };
        out.push(d);
    }
    Ok(out)
}

/// A fixed-width window over a token sequence: the kept token range plus the
/// number of padding positions inserted on the left to reach `window` slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowPlacement {
    pub start: usize,
    pub end: usize,
    pub left_pad: usize,
}

impl WindowPlacement {
    pub fn kept(&self) -> usize {
        self.end - self.start
    }
}

fn span_center(span: &Span) -> usize {
    (span.start + span.end - 1) / 2
}

/// Places a window of `window` tokens around one focus span or the midpoint
/// of two. The window is shifted back into the text when the focus sits near
/// an edge; texts shorter than the window keep every token and are padded on
/// the left.
pub fn extract_window(length: usize, focus: &[Span], window: usize) -> Result<WindowPlacement> {
    assert!(window > 0, "window must be positive");
    assert!(
        (1..=2).contains(&focus.len()),
        "window takes one or two focus spans"
    );
    for span in focus {
        span.validate(length)?;
    }
    if length <= window {
        return Ok(WindowPlacement {
            start: 0,
            end: length,
            left_pad: window - length,
        });
    }
    let center = if focus.len() == 1 {
        span_center(&focus[0])
    } else {
        (span_center(&focus[0]) + span_center(&focus[1])) / 2
    };
    // Even windows put the extra slot on the left of the center.
    let mut lo = center as isize - (window / 2) as isize;
    let mut hi = lo + window as isize;
    if lo < 0 {
        hi -= lo;
        lo = 0;
    }
    if hi > length as isize {
        lo -= hi - length as isize;
        hi = length as isize;
    }
    Ok(WindowPlacement {
        start: lo as usize,
        end: hi as usize,
        left_pad: 0,
    })
}

/// Index sequences for one assembled input window. All sequences run over
/// the same positions; padding positions carry the respective padding
/// indices. `pos` is `None` when the model runs without POS features — a
/// present-but-empty sequence still contributes its one-hot block width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureIndices {
    pub words: Vec<usize>,
    pub pos: Option<Vec<usize>>,
    /// Zero, one or two distance-embedding index sequences.
    pub distances: Vec<Vec<usize>>,
}

impl FeatureIndices {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    fn check_lengths(&self) -> Result<()> {
        let n = self.words.len();
        let ok = self.pos.as_ref().is_none_or(|p| p.len() == n)
            && self.distances.iter().all(|d| d.len() == n);
        if ok {
            Ok(())
        } else {
            Err(Error::Shape {
                context: "input assembly".to_string(),
                expected: format!("{n} positions in every feature sequence"),
                actual: format!(
                    "pos {:?}, distances {:?}",
                    self.pos.as_ref().map(Vec::len),
                    self.distances.iter().map(Vec::len).collect::<Vec<_>>()
                ),
            })
        }
    }
}

fn one_hot_rows(indices: &[usize], width: usize) -> Tensor2 {
    let mut t = Tensor2::zeros(indices.len(), width);
    for (r, &idx) in indices.iter().enumerate() {
        if idx < width {
            t.set(r, idx, 1.0);
        }
    }
    t
}

/// Concatenates looked-up word embeddings, POS one-hots and distance
/// embeddings into one input tensor, row per position.
pub fn assemble_input(
    features: &FeatureIndices,
    word_table: &Parameter,
    pos_width: usize,
    dist_tables: &[&Parameter],
) -> Result<Tensor2> {
    features.check_lengths()?;
    assert_eq!(features.distances.len(), dist_tables.len());
    let mut parts: Vec<Tensor2> = vec![embedding_forward(word_table, &features.words)?];
    if let Some(pos) = &features.pos {
        parts.push(one_hot_rows(pos, pos_width));
    }
    for (seq, table) in features.distances.iter().zip(dist_tables) {
        parts.push(embedding_forward(table, seq)?);
    }
    let refs: Vec<&Tensor2> = parts.iter().collect();
    Ok(Tensor2::hcat(&refs))
}

/// Scatters the input-tensor gradient back into the word and distance
/// tables; the POS one-hot block carries no parameters and is skipped.
pub fn scatter_input_grad(
    features: &FeatureIndices,
    grad: &Tensor2,
    word_table: &mut Parameter,
    pos_width: usize,
    dist_tables: &mut [&mut Parameter],
) {
    let n = features.len();
    let d_word = word_table.cols();
    let mut word_grad = Tensor2::zeros(n, d_word);
    for r in 0..n {
        word_grad.row_mut(r).copy_from_slice(&grad.row(r)[..d_word]);
    }
    embedding_backward(word_table, &features.words, &word_grad);
    let mut offset = d_word + if features.pos.is_some() { pos_width } else { 0 };
    for (seq, table) in features.distances.iter().zip(dist_tables.iter_mut()) {
        let d = table.cols();
        let mut dist_grad = Tensor2::zeros(n, d);
        for r in 0..n {
            dist_grad
                .row_mut(r)
                .copy_from_slice(&grad.row(r)[offset..offset + d]);
        }
        embedding_backward(table, seq, &dist_grad);
        offset += d;
    }
}
