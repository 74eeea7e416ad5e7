//! Relational sentiment analysis toolkit.
//!
//! Three trainable components cover the full task: sequence taggers that
//! extract aspect and opinion terms, a classifier that assigns each opinion
//! term one of four sentiment labels, and a pairwise classifier that links
//! opinion terms to the aspect terms they target. Everything runs on a small
//! hand-written neural core (`nn`) whose gradients are verifiable against
//! finite differences.

pub mod bundle;
pub mod check;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod iob2;
pub mod nn;
pub mod pipeline;
pub mod relation;
pub mod sentiment;
pub mod synth;
pub mod tagger;
pub mod training;
pub(crate) mod windownet;

pub use error::{Error, Result};
