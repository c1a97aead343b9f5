//! Comparison methods: closed-form linear maps, Siamese and triplet
//! embedding networks, and a hashing-loss diagnostic.

mod dsh;
mod embedding;
mod linear;
mod losses;
mod triplets;

pub use dsh::{dsh_loss_eval, DshLoss, DshLossInputs, DSH_DEFAULT_GAMMA, DSH_DEFAULT_LAMBDA};
pub use embedding::{
    train_embedding, EmbeddingBatch, EmbeddingConfig, EmbeddingLoss, EmbeddingPair, PairItem,
};
pub use linear::{
    eszsl_objective, fit_direct_regression, fit_eszsl, fit_sae, regression_gradient,
    regression_objective, sae_objective, FitMeta, LinearMap, LinearMethod,
};
pub use losses::{
    siamese_loss_v1, siamese_loss_v2, siamese_v1_with_grad, siamese_v2_with_grad, triplet_active,
    triplet_loss, SIAMESE_EXP_RATE,
};
pub use triplets::{sample_triplets, Triplet, TripletSampler, TripletStrategy};
