//! Differentiable building blocks with hand-written backward passes.
//!
//! Every backward function *accumulates* into caller-provided gradient
//! slices, so parameters shared by several paths (an embedding row touched by
//! two fields, DeepFM's shared table) receive the sum of all contributions.

mod batchnorm;
mod dense;
mod dropout;
mod embedding;
mod grad;
mod interaction;

pub use batchnorm::{BatchNormCache, BatchNormLayer};
pub use dense::{Activation, DenseCache, DenseLayer};
pub use dropout::DropoutLayer;
pub use embedding::{EmbeddingTable, FieldEmbeddings};
pub use grad::{GradBuffer, GradBuffers};
pub use interaction::{
    concat, elementwise_backward, elementwise_interaction, inner_product_backward,
    inner_product_interaction, pair_count, pairs, split_concat_grad, InteractionTensor,
};
pub(crate) use interaction::{
    inner_backward as inner_product_backward_raw, inner_forward as inner_product_forward_raw,
};

/// Train mode enables dropout masks and batch statistics; eval mode makes
/// both layers deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
