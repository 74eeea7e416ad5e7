//! IOB2 tag codec: conversion between annotation spans and tag sequences,
//! plus repair of invalid predicted sequences.
//!
//! Under IOB2 every annotation starts with `B`; `I` continues it and `O`
//! marks everything else. Aspect and opinion annotations are encoded as two
//! separate tag sequences per review, never merged into one tag set.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    I,
    O,
    B,
}

impl Tag {
    pub const COUNT: usize = 3;

    /// Index of this tag in probability vectors emitted by tagger heads.
    pub fn index(self) -> usize {
        match self {
            Tag::I => 0,
            Tag::O => 1,
            Tag::B => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Tag> {
        match index {
            0 => Some(Tag::I),
            1 => Some(Tag::O),
            2 => Some(Tag::B),
            _ => None,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::I => "I",
            Tag::O => "O",
            Tag::B => "B",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanRole {
    Aspect,
    Opinion,
}

impl fmt::Display for SpanRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpanRole::Aspect => "aspect",
            SpanRole::Opinion => "opinion",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Positive,
    Neutral,
    Negative,
    Unknown,
}

impl SentimentLabel {
    pub const COUNT: usize = 4;
    pub const ALL: [SentimentLabel; 4] = [
        SentimentLabel::Positive,
        SentimentLabel::Neutral,
        SentimentLabel::Negative,
        SentimentLabel::Unknown,
    ];

    pub fn index(self) -> usize {
        match self {
            SentimentLabel::Positive => 0,
            SentimentLabel::Neutral => 1,
            SentimentLabel::Negative => 2,
            SentimentLabel::Unknown => 3,
        }
    }

    pub fn from_index(index: usize) -> Option<SentimentLabel> {
        Self::ALL.get(index).copied()
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SentimentLabel::Positive => "positive",
            SentimentLabel::Neutral => "neutral",
            SentimentLabel::Negative => "negative",
            SentimentLabel::Unknown => "unknown",
        })
    }
}

/// Token-index interval `[start, end)` with a role and an optional sentiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub role: SpanRole,
    pub sentiment: Option<SentimentLabel>,
}

impl Span {
    pub fn new(start: usize, end: usize, role: SpanRole) -> Self {
        Span {
            start,
            end,
            role,
            sentiment: None,
        }
    }

    pub fn with_sentiment(mut self, sentiment: SentimentLabel) -> Self {
        self.sentiment = Some(sentiment);
        self
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn validate(&self, sequence_len: usize) -> Result<()> {
        if self.start < self.end && self.end <= sequence_len {
            Ok(())
        } else {
            Err(Error::SpanOutOfRange {
                start: self.start,
                end: self.end,
                len: sequence_len,
            })
        }
    }
}

/// Checks that spans are in range and mutually non-overlapping.
pub fn validate_spans(spans: &[Span], sequence_len: usize) -> Result<()> {
    for span in spans {
        span.validate(sequence_len)?;
    }
    let mut sorted: Vec<&Span> = spans.iter().collect();
    sorted.sort_by_key(|s| s.start);
    for pair in sorted.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(Error::OverlappingSpans {
                a: pair[0].start,
                b: pair[0].end,
                c: pair[1].start,
                d: pair[1].end,
            });
        }
    }
    Ok(())
}

/// Encodes one role's spans into an IOB2 tag sequence of the given length.
pub fn encode(spans: &[Span], length: usize) -> Result<Vec<Tag>> {
    validate_spans(spans, length)?;
    let mut tags = vec![Tag::O; length];
    for span in spans {
        tags[span.start] = Tag::B;
        for t in tags.iter_mut().take(span.end).skip(span.start + 1) {
            *t = Tag::I;
        }
    }
    Ok(tags)
}

/// Decodes a valid IOB2 tag sequence back into spans. Invalid sequences
/// (an `I` with no preceding `B` or `I`) are a fault; run [`repair`] first
/// when decoding raw model output.
pub fn decode(tags: &[Tag], role: SpanRole) -> Result<Vec<Span>> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (pos, tag) in tags.iter().enumerate() {
        match tag {
            Tag::B => {
                if let Some(start) = open.take() {
                    spans.push(Span::new(start, pos, role));
                }
                open = Some(pos);
            }
            Tag::I => {
                if open.is_none() {
                    return Err(Error::InvalidTags {
                        position: pos,
                        reason: "I tag without a preceding B or I".to_string(),
                    });
                }
            }
            Tag::O => {
                if let Some(start) = open.take() {
                    spans.push(Span::new(start, pos, role));
                }
            }
        }
    }
    if let Some(start) = open {
        spans.push(Span::new(start, tags.len(), role));
    }
    Ok(spans)
}

/// Rewrites any `I` that does not continue an annotation into a `B`.
/// Valid sequences pass through unchanged and the result always decodes.
pub fn repair(tags: &[Tag]) -> Vec<Tag> {
    let mut out = Vec::with_capacity(tags.len());
    for (pos, &tag) in tags.iter().enumerate() {
        let fixed = match tag {
            Tag::I if pos == 0 || out[pos - 1] == Tag::O => Tag::B,
            other => other,
        };
        out.push(fixed);
    }
    out
}

/// Renders a tag sequence as space-separated letters, e.g. "O B I O".
pub fn render_tags(tags: &[Tag]) -> String {
    tags.iter()
        .map(Tag::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}
