//! Desk-scale lottery-ticket laboratory.
//!
//! Trains small feed-forward networks, extracts tickets with iterative
//! large-final magnitude pruning under controlled randomness, and measures
//! how unique those tickets are against hypergeometric and recursive
//! random-mask baselines.
//!
//! Module map:
//!
//! * [`nn`]: deterministic dense/conv network engine with masked weights.
//! * [`rng`]: labelled, independently seedable random streams and seed policies.
//! * [`pruning`]: masks, schedules and the train-prune-reset loop.
//! * [`stats`]: hypergeometric machinery, overlap baselines, Spearman, Monte Carlo oracle.
//! * [`similarity`]: L2 distance and linear CKA between probe-set outputs.
//! * [`io`]: dataset parsers, synthetic blobs, mask files and run manifests.
//! * [`runner`]: experiment plans, comparison modes, CSV/JSON/SVG reports.

pub mod error;
pub mod exec;
pub mod io;
pub mod nn;
pub mod pruning;
pub mod rng;
pub mod runner;
pub mod similarity;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
pub use exec::Execution;
pub use tensor::Tensor;
