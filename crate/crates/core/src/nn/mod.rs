//! A small from-scratch CNN: tensors, layers with manual backpropagation,
//! softmax cross-entropy and SGD with momentum.

pub mod checkpoint;
mod kernels;
pub mod network;
pub mod optim;
pub mod tensor;
pub mod train;

pub use network::{
    appendix_specs, argmax, build_appendix_cnn, softmax_cross_entropy, ForwardCache,
    KaimingUniform, LayerSpec, Network, Pass,
};
pub use optim::SgdMomentum;
pub use tensor::Tensor;
pub use train::{evaluate, predictions, train_epoch, Dataset, Metrics};
