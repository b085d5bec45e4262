//! A small convolutional classifier written from first principles:
//! same-padded convolutions with ReLU, a dense head, softmax cross-entropy,
//! and plain mini-batch SGD.

pub mod layers;
pub mod network;
pub mod tensor;
pub mod train;

pub use layers::{
    conv2d_backward, conv2d_forward, fully_connected, fully_connected_backward, relu, relu_backward, sgd_step, softmax,
    softmax_cross_entropy, ConvGrads, DenseGrads,
};
pub use network::{Network, NetworkSpec, Prediction, Workspace};
pub use tensor::Tensor;
pub use train::{evaluate, fit, train, train_step, EpochMetrics, Metrics, TrainConfig, TrainOutcome};
