//! The classifier network: stacked LSTMs → sigmoid dense → dropout → softmax.

pub mod adam;
pub mod config;
pub mod lstm;
pub mod model;
pub mod params;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use config::{param_count, ModelConfig, REPORTED_PARAM_COUNT};
pub use lstm::lstm_cell_step;
pub use model::{forward, forward_with, loss_and_grads, loss_and_grads_with, loss_grads_and_predictions, predict_classes, Dropout};
pub use params::{glorot_bound, init_params, Activation, DenseLayerParams, Layer, LstmLayerParams, ModelParams};
