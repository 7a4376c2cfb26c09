//! The neural scoring model and its training machinery.
//!
//! The scorer is a fully connected ReLU network
//! `f(x; theta) = sqrt(m) * W_L relu(W_{L-1} relu(... relu(W_1 x)))`
//! with hidden width `m` and depth `L >= 2`. Its flattened gradient with
//! respect to all parameters (the tangent feature `g(x; theta)`) doubles as
//! the feature map for pairwise uncertainty estimates.
//!
//! Submodules:
//! - [`network`]: parameter storage, symmetric initialization, forward pass,
//!   and exact backpropagated tangent features;
//! - [`training`]: the pairwise cross-entropy objective over the accumulated
//!   click-pair history and full-batch gradient descent;
//! - [`checkpoint`]: a versioned little-endian binary parameter format.

mod checkpoint;
mod network;
mod training;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use network::{
    forward, gradient, init_params, score_and_gradient, NetworkParams, TangentVector,
};
pub use training::{
    delta_ndcg_weight, pair_loss, train, PairObservation, TrainConfig,
};

/// The logistic link `1 / (1 + exp(-s))` used for pairwise preferences.
#[inline]
pub fn sigmoid(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}
