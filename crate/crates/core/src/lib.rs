//! Knowledge graph validation with a trusted external graph.
//!
//! A noisy target graph and a curated external graph are aligned into one
//! entity id space, embedded jointly with a confidence-weighted logistic loss
//! plus cross-graph negative sampling, and every target triplet is ranked by
//! its score: the lowest-ranked triplets are the likeliest errors.

pub mod alignment;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod negatives;
pub mod trainer;

pub mod experiment;
pub mod pipeline;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
