//! Minimal deterministic CNN engine.
//!
//! Just enough machinery for the two classifier presets: valid stride-1
//! convolutions, ReLU, 2x2 max-pooling, dense layers, and a softmax
//! cross-entropy head, trained with Adam. Everything is 32-bit and
//! bit-reproducible: fixed seeds give identical parameters, loss curves, and
//! predictions regardless of thread count (within-batch parallelism reduces
//! over fixed-size chunks in a fixed order).
//!
//! [`reference`] holds slow scalar f64 re-implementations of the forward
//! pass used by the gradient and forward verification suites; they share no
//! code with the fast path.

mod adam;
mod checkpoint;
mod layers;
mod model;
pub mod reference;
mod tensor;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_model, save_model, CheckpointError};
pub use model::{LayerSpec, Model, ModelError, ModelSpec};
pub use tensor::Tensor;
pub use train::{
    evaluate, forward, loss_and_gradients, train, EvalReport, Metrics, TrainConfig, TrainError,
};
