//! Raw click logs to encoded, batched samples.
//!
//! Every field contributes exactly one active feature per record. Categorical
//! fields own a contiguous index range of retained categories followed by a
//! per-field OOV slot; numerical fields are discretized into quantile buckets
//! and own `buckets + 1` slots, the last one holding missing values. All
//! categorical ranges come first (in schema order), then all numerical ones,
//! so the ranges partition `[0, n)`.

mod buckets;
mod encode;
mod io;
mod sampling;
mod schema;
mod vocab;

pub use buckets::{fit_buckets, BucketSpec, Buckets};
pub use encode::{encode, EncodedSample, FeatureMap};
pub use io::{read_encoded, read_raw, write_encoded, write_raw, RawRecord};
pub use sampling::{batch_iter, downsample_negatives, split, Batch, BatchIter, Labeled, SplitMode};
pub use schema::{FeatureSchema, Field, FieldKind};
pub use vocab::{build_vocabulary, FieldVocab, Vocabulary};
