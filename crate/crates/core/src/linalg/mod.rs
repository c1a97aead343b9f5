//! Dense numerical substrate.

mod eig;
mod kmeans;
mod matrix;
mod rng;
mod similarity;
mod sylvester;

pub use eig::{check_symmetric, sym_eig, SymEig};
pub use kmeans::{kmeans, KMeans, KMEANS_MAX_ITERS, KMEANS_TOLERANCE};
pub use matrix::{dot, norm, sq_dist, Matrix};
pub use rng::{gaussian_sample, Rng};
pub use similarity::cosine_similarity;
pub use sylvester::{
    cholesky_solve, kron_solve_oracle, lu_solve, solve_sylvester, sylvester_residual,
    KRON_ORACLE_MAX_DIM,
};
