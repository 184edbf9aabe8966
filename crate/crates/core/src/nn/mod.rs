//! A small convolutional network written from scratch: conv, max-pool,
//! dropout, flatten and dense layers, softmax cross-entropy, reverse-mode
//! gradients and Adam.
//!
//! Layers are generic over [`Scalar`] so the same code trains in `f32` and
//! is gradient-checked in `f64`.

mod adam;
mod io;
mod model;
mod ops;
mod tensor;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use io::{load_model, save_model, ModelFile, MODEL_MAGIC, MODEL_VERSION};
pub use model::{Activation, ForwardCache, LayerSpec, Mode, Model, ModelSpec};
pub use ops::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, dropout, maxpool2_backward,
    maxpool2_forward, softmax, softmax_cross_entropy, LayerGrads,
};
pub use tensor::{Scalar, Tensor};
pub use train::{evaluate, predict, train, train_with_progress, write_history_csv, Dataset, EpochStats, TrainConfig};
