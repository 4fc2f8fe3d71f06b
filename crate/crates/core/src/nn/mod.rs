//! Fully connected ReLU regressor with exact backpropagation and ADAM.
//!
//! The network computes `W_L σ_{v_L} W_{L-1} … W_1 σ_{v_1} W_0 x` where
//! `σ_v(z) = max(0, z - v)` is a ReLU whose bias sits inside the activation.
//! There is no bias on the output layer.

mod adam;
mod model;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use model::{Gradients, MlpModel, MlpSpec};
pub use train::{train_from, train_window, train_window_report, TrainConfig, TrainReport};
