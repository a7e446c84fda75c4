//! Requirements-engineering tasks recast as binary entailment.
//!
//! The crate trains a small self-attention encoder to decide whether a
//! requirement (premise) entails or contradicts a verbalized category
//! description (hypothesis), and benchmarks that formulation against four
//! baselines: per-category one-vs-rest fine-tuning, prompt-style binary
//! matching, a chat-API client, and a probabilistic indicator-term
//! classifier. Three tasks share the harness: category classification,
//! specification-defect detection, and cross-requirement conflict detection.

pub mod baselines;
pub mod chat;
pub mod conflict;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod indicator;
pub mod nli;
pub mod registry;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
