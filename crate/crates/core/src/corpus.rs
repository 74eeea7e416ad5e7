//! Neutral JSONL corpus format: one review object per line with tokens, POS
//! tags, gold aspect/opinion spans (opinions carry an optional sentiment)
//! and gold relations as (aspect index, opinion index) pairs.
//!
//! All invariants are enforced at load time with the offending line number.
//! POS tags normally come with the corpus; reviews without them get the
//! degenerate fallback tag on every token, which one-hot encodes as the
//! padding slot.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iob2::{validate_spans, SentimentLabel, Span, SpanRole};

#[derive(Debug, Clone, PartialEq)]
pub struct Review {
    pub id: String,
    pub tokens: Vec<String>,
    pub pos: Vec<String>,
    pub aspects: Vec<Span>,
    pub opinions: Vec<Span>,
    pub relations: Vec<(usize, usize)>,
}

impl Review {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.pos.len() != self.tokens.len() {
            return Err(Error::Corpus {
                line: 0,
                reason: format!(
                    "review '{}': {} POS tags for {} tokens",
                    self.id,
                    self.pos.len(),
                    self.tokens.len()
                ),
            });
        }
        // Per-role overlap is forbidden; aspect-opinion overlap is allowed.
        validate_spans(&self.aspects, self.tokens.len())?;
        validate_spans(&self.opinions, self.tokens.len())?;
        for &(a, o) in &self.relations {
            if a >= self.aspects.len() || o >= self.opinions.len() {
                return Err(Error::Corpus {
                    line: 0,
                    reason: format!(
                        "review '{}': relation ({a}, {o}) out of range for {} aspects, {} opinions",
                        self.id,
                        self.aspects.len(),
                        self.opinions.len()
                    ),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SpanRecord {
    start: usize,
    end: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    sentiment: Option<SentimentLabel>,
}

/// Tag assigned by the fallback tagger when a review ships without POS
/// annotations; not a Penn Treebank tag, so it maps to the padding slot.
pub const DEGENERATE_POS_TAG: &str = "X";

#[derive(Debug, Serialize, Deserialize)]
struct ReviewRecord {
    id: String,
    tokens: Vec<String>,
    #[serde(default)]
    pos: Vec<String>,
    aspects: Vec<SpanRecord>,
    opinions: Vec<SpanRecord>,
    relations: Vec<(usize, usize)>,
}

fn span_from_record(rec: SpanRecord, role: SpanRole) -> Span {
    Span {
        start: rec.start,
        end: rec.end,
        role,
        sentiment: rec.sentiment,
    }
}

fn span_to_record(span: &Span) -> SpanRecord {
    SpanRecord {
        start: span.start,
        end: span.end,
        sentiment: span.sentiment,
    }
}

impl From<ReviewRecord> for Review {
    fn from(rec: ReviewRecord) -> Self {
        let pos = if rec.pos.is_empty() && !rec.tokens.is_empty() {
            vec![DEGENERATE_POS_TAG.to_string(); rec.tokens.len()]
        } else {
            rec.pos
        };
        Review {
            id: rec.id,
            tokens: rec.tokens,
            pos,
            aspects: rec
                .aspects
                .into_iter()
                .map(|s| span_from_record(s, SpanRole::Aspect))
                .collect(),
            opinions: rec
                .opinions
                .into_iter()
                .map(|s| span_from_record(s, SpanRole::Opinion))
                .collect(),
            relations: rec.relations,
        }
    }
}

impl From<&Review> for ReviewRecord {
    fn from(review: &Review) -> Self {
        ReviewRecord {
            id: review.id.clone(),
            tokens: review.tokens.clone(),
            pos: review.pos.clone(),
            aspects: review.aspects.iter().map(span_to_record).collect(),
            opinions: review.opinions.iter().map(span_to_record).collect(),
            relations: review.relations.clone(),
        }
    }
}

pub fn parse_corpus(reader: impl BufRead) -> Result<Vec<Review>> {
    let mut reviews = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ReviewRecord = serde_json::from_str(&line).map_err(|e| Error::Corpus {
            line: line_no,
            reason: e.to_string(),
        })?;
        let review: Review = record.into();
        review.validate().map_err(|e| Error::Corpus {
            line: line_no,
            reason: e.to_string(),
        })?;
        if !ids.insert(review.id.clone()) {
            return Err(Error::Corpus {
                line: line_no,
                reason: format!("duplicate review id '{}'", review.id),
            });
        }
        reviews.push(review);
    }
    Ok(reviews)
}

pub fn load_corpus(path: &Path) -> Result<Vec<Review>> {
    parse_corpus(BufReader::new(File::open(path)?))
}

pub fn write_corpus(writer: impl Write, reviews: &[Review]) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for review in reviews {
        let record: ReviewRecord = review.into();
        serde_json::to_writer(&mut w, &record)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_corpus(path: &Path, reviews: &[Review]) -> Result<()> {
    write_corpus(File::create(path)?, reviews)
}
