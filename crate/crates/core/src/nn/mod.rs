//! Forward-pass building blocks and the weight archive format.

pub mod archive;
pub mod conv;
pub mod ops;
pub mod rnn;
mod tensor;

pub use archive::{load_weights, save_weights, ArchiveError, WeightArchive};
pub use conv::{causal_grouped_conv2d, CausalConv2d, ConvContext};
pub use ops::{affine_norm, gelu, linear, AffineNorm, Linear};
pub use rnn::{gru_step, lstm_step, GruParams, LstmParams, LstmState};
pub use tensor::Tensor;
