//! Minimal convolutional runtime: conv+ReLU and max-pool layers, masked
//! forward passes that record every activation, and single-path
//! backpropagation over the recorded trace.

mod backprop;
mod network;
mod ops;
mod spec;
mod tensor;
mod weights;

pub use backprop::{backward_single_path, GradPatch, GradTarget, UnitRef};
pub(crate) use backprop::backward_patch;
pub use network::{forward_pass, ActivationTrace, LayerTrace, Network};
pub use ops::{conv_forward, maxpool_forward};
pub use spec::{output_dim, ConvSpec, LayerGeometry, LayerKind, LayerSpec, LrnSpec, NetworkSpec, PoolSpec};
pub use tensor::Tensor3;
pub use weights::{ConvWeights, WeightManifest, WeightSet};
