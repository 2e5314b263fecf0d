//! Self-contained neural toolkit for the training stack.
//!
//! Everything is plain `f64` on flat parameter vectors: multilayer
//! perceptrons with ReLU hidden layers and linear outputs, analytic
//! backpropagation, diagonal Gaussian policy heads, closed-form Gaussian
//! log-density and KL divergence, and bias-corrected Adam. No autograd, no
//! BLAS; the networks here are small enough that straightforward loops are
//! both fast and exactly reproducible.

mod adam;
mod checkpoint;
mod error;
mod gaussian;
mod mlp;
mod policy;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, NetPayload, CHECKPOINT_VERSION};
pub use error::NnError;
pub use gaussian::{
    diag_gaussian_kl, diag_gaussian_logprob, diag_gaussian_logprob_grads, diag_gaussian_sample,
};
pub use mlp::{Mlp, MlpCache, MlpSpec};
pub use policy::{GaussianParams, GaussianPolicy, PolicyCache, LOGVAR_MAX, LOGVAR_MIN};
