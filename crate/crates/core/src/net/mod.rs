//! Minimal convolutional network with reverse-mode gradients.
//!
//! The network is a flat list of layers over a single parameter vector.
//! [`NetworkState::forward`] records every layer's output so that
//! [`NetworkState::backward`] can return both the parameter gradient and
//! the gradient with respect to each convolution's output, which is what
//! Grad-CAM consumes.

mod adam;
mod layers;
mod spec;
mod state;

pub use adam::{AdamConfig, OptimizerState};
pub use spec::{Layer, NetworkSpec, Shape};
pub use state::{
    backward_pass, cross_entropy_batch, forward_pass, forward_pass_frozen, ActivationPattern, Backward, FeatureGrad, ForwardCache, NetworkState,
};
