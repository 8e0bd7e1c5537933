//! Encoder/decoder networks between RGB albedo and the 5D unit cube.
//!
//! Both networks are `[in, h, h, out]` MLPs with rectifier hidden layers and
//! logistic outputs, trained jointly on
//! `L = L_param + L_albedo + L_cycle` with Adam. Parameters are regressed in
//! warped unit-cube coordinates; [`crate::space::ParamWarp`] maps them back
//! to physical values.

mod loss;
mod mlp;
mod train;

pub use loss::{batch_arrays, loss, loss_and_grad, EncoderDecoder, LossBreakdown, LossWeights};
pub use mlp::{spectral_norm, Activations, Mlp};
pub use train::{adam_step, evaluate, train, train_with, AdamState, EpochLoss, TrainConfig, TrainOutcome};
