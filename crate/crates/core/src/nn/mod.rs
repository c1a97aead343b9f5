//! Feed-forward networks with analytic gradients and the Adam optimizer.

mod adam;
mod kl;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use kl::{gaussian_kl, gaussian_kl_grad};
pub use mlp::{sigmoid, Activation, ForwardTrace, Mlp, MlpGrads, OutputActivation};

/// Gradients for a group of networks, in the group's own order.
pub type GradientSet<T = f64> = Vec<MlpGrads<T>>;
