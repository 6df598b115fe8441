//! Score-guided one-step CSI denoising conditioned on the error level.

pub mod loss;
pub mod model;
pub mod train;

pub use loss::{dsn_batch_loss, dsn_loss, dsn_loss_and_grad, dsn_objective, multitask_loss, DenoiseExample};
pub use model::{denoise, score_step, DebertConfig, DebertModel, DenoiseResult, DenoiseVars};
pub use train::{perturbed_examples, train_dsn, validation_loss, DenoiserRun};
