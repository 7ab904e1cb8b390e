//! Small fully connected networks and the interval-regression losses.

pub mod loss;
pub mod mlp;
pub mod train;

pub use loss::{pinball_derivative, pinball_loss, qd_loss, sqr_loss, Loss, QdTerms};
pub use mlp::{parameter_count_for, Activation, Layer, MlpModel};
pub use train::{batch_loss_and_gradient, mlp_train, predict, Optimizer, TrainConfig, TrainOutcome};
