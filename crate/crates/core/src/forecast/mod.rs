//! Residual-generating forecasters: the operational autoregressive model and
//! the attention / distilling / decoder-input building blocks.

mod ar;
mod attention;
mod encoder;

pub use ar::{fit_ar, residuals, ArModel, RIDGE_EPSILON};
pub use attention::{
    attention_weights, default_active_queries, full_attention, probsparse_attention,
    probsparse_attention_detailed, sparsity_measure, AttentionInput, ProbSparseOutput,
};
pub use encoder::{
    decoder_input, distill_layer, DecoderInput, DistillLayer, EncoderLayerState, ToyTisat,
    ToyTisatConfig, KERNEL_WIDTH, POOL_STRIDE,
};

/// Sliding-window length used by the sequence model.
pub const DEFAULT_WINDOW: usize = 100;
