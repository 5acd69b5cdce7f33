//! Trainable digital readout: a small convolutional network with Swish
//! activations, softmax cross-entropy and Adam, plus a ridge baseline.

pub mod adam;
pub mod metrics;
pub mod model;
pub mod ops;
pub mod ridge;
pub mod tensor;

pub use adam::{adam_update, AdamConfig, Moments};
pub use metrics::ConfusionMatrix;
pub use model::{
    build_default_model, build_model, evaluate, freeze_and_retrain_head, gradcheck, train, Architecture,
    ConvLayer, DenseLayer, Evaluation, HeadRetrain, Layer, ReadoutModel, TrainConfig,
};
pub use ops::{softmax_cross_entropy, swish, swish_grad, Activation};
pub use ridge::{ridge_fit, ridge_predict, RidgeModel};
pub use tensor::{Shape, Tensor};
