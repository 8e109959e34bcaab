//! Click-through-rate models built on sparse categorical fields.
//!
//! The crate covers the whole path from raw delimited click logs to trained
//! models:
//!
//! - [`data`]: schema, frequency-filtered vocabularies, quantile buckets,
//!   one-hot encoding, negative downsampling, splits and mini-batching.
//! - [`layers`]: embedding lookup, the inner / element-wise / bilinear
//!   interaction operators, dense layers, dropout and batch normalization,
//!   each with an exact backward pass.
//! - [`models`]: LR, FM, FNN, PNN, Wide & Deep, DeepFM and FINN composed
//!   from those layers behind one forward/backward interface.
//! - [`training`]: log loss, Adam, the mini-batch loop and a
//!   central-difference gradient checker.
//! - [`metrics`]: AUC (Mann-Whitney with midranks) and mean log loss.
//! - [`checkpoint`]: a versioned little-endian binary container for models.
//!
//! All arithmetic is `f64`.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod layers;
pub mod math;
pub mod metrics;
pub mod models;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use math::{Rng, Tensor};
pub use models::{ModelConfig, ModelGraph, Prediction, Variant};
