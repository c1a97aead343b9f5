//! Feature-space laboratory for zero-shot sketch-based image retrieval.
//!
//! Sketch and image features arrive as fixed vectors. Conditional generative
//! models (CVAE, CAAE) and a set of baselines learn a sketch→image mapping on
//! seen classes; retrieval for unseen classes generates candidate image
//! features per sketch, clusters them, and ranks the database by the best
//! cosine similarity to any cluster centre.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar to `f64`, which is what the file formats and the CLI use.

// `!(x > 0)` style guards are meant to catch NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod error;
pub mod generative;
pub mod gradcheck;
pub mod linalg;
pub mod nn;
pub mod retrieval;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mat = linalg::Matrix<f64>;
pub type Mat32 = linalg::Matrix<f32>;
pub type Net = nn::Mlp<f64>;
pub type Cvae = generative::CvaeModel<f64>;
pub type Caae = generative::CaaeModel<f64>;
pub type Linear = baselines::LinearMap<f64>;
pub type Embedding = baselines::EmbeddingPair<f64>;
pub type Query = retrieval::QueryRepresentation<f64>;
