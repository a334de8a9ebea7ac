//! Deterministic topic discovery over document vectors.
//!
//! Topics emerge from progressively tighter cosine-similarity neighbourhoods
//! of the documents; no topic count is fixed up front. Each iteration yields
//! a [`discovery::TopicSnapshot`], descriptor words are ranked by per-topic
//! information gain, and a set of coherence and distinctiveness measures
//! scores the result.

pub mod corpus;
pub mod descriptors;
pub mod discovery;
pub mod error;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod schedule;
pub mod similarity;
pub mod tuning;

pub use error::{Error, Result};
