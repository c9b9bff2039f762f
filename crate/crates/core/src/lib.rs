pub mod augment;
pub mod checkpoint;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::{Real, Tensor};
