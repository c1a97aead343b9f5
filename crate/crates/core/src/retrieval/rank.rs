use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, kmeans, norm, Matrix, Rng};
use crate::scalar::Real;

use super::generator::FeatureGenerator;

pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_CLUSTERS: usize = 5;
pub const DEFAULT_CUTOFF: usize = 200;

/// Cluster centres summarizing the generated candidates for one sketch.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryRepresentation<T = f64> {
    pub centroids: Matrix<T>,
    pub source: String,
    pub n_samples: usize,
    pub k_clusters: usize,
    pub seed: u64,
}

/// Draws `n` candidates for `sketch` and clusters them into `k` centroids.
/// Deterministic generators yield their single prediction as the only
/// centroid.
pub fn build_query_representation<T: Real, G: FeatureGenerator<T> + ?Sized>(
    generator: &G,
    sketch: &[T],
    n: usize,
    k: usize,
    rng: &mut Rng,
) -> Result<QueryRepresentation<T>> {
    if k == 0 || n < k {
        return Err(Error::Cardinality {
            what: "generated samples for clustering",
            needed: k.max(1),
            got: n,
        });
    }
    if sketch.len() != generator.d_sketch() {
        return Err(Error::dim("query sketch", generator.d_sketch(), sketch.len()));
    }
    let seed = rng.seed();
    let samples = generator.generate(sketch, n, rng)?;
    let (centroids, n_samples, k_clusters) = if generator.is_stochastic() {
        (kmeans(&samples, k, rng)?.centroids, n, k)
    } else {
        (samples.select_rows(&[0]), 1, 1)
    };
    if let Some((row, col)) = centroids.first_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    Ok(QueryRepresentation {
        centroids,
        source: generator.source(),
        n_samples,
        k_clusters,
        seed,
    })
}

/// Per-row similarity scores for one query.
#[derive(Clone, Debug, PartialEq)]
pub struct Scores<T = f64> {
    pub values: Vec<T>,
    /// Database rows with zero norm; they score `-inf`.
    pub degenerate_rows: usize,
}

/// Database rows with their Euclidean norms, computed once and reused for
/// every query.
#[derive(Clone, Debug)]
pub struct ScoringIndex<'a, T = f64> {
    db: &'a Matrix<T>,
    norms: Vec<T>,
}

impl<'a, T: Real> ScoringIndex<'a, T> {
    pub fn new(db: &'a Matrix<T>) -> Self {
        let norms = db.row_iter().map(norm).collect();
        Self { db, norms }
    }

    /// `max_k cos(x, C_k)` for every database row `x`.
    pub fn score(&self, centroids: &Matrix<T>) -> Result<Scores<T>> {
        if centroids.cols() != self.db.cols() {
            return Err(Error::dim("score_database", self.db.cols(), centroids.cols()));
        }
        let live: Vec<(&[T], T)> = centroids
            .row_iter()
            .map(|c| (c, norm(c)))
            .filter(|(_, n)| *n > T::zero())
            .collect();
        if live.is_empty() {
            return Err(Error::Degenerate("every query centroid has zero norm".into()));
        }
        let mut degenerate_rows = 0;
        let values = self
            .db
            .row_iter()
            .zip(&self.norms)
            .map(|(x, &nx)| {
                if nx == T::zero() {
                    degenerate_rows += 1;
                    return T::neg_infinity();
                }
                live.iter()
                    .map(|&(c, nc)| (dot(x, c) / (nx * nc)).max(-T::one()).min(T::one()))
                    .fold(T::neg_infinity(), T::max)
            })
            .collect();
        Ok(Scores { values, degenerate_rows })
    }
}

pub fn score_database<T: Real>(query: &QueryRepresentation<T>, db: &Matrix<T>) -> Result<Scores<T>> {
    ScoringIndex::new(db).score(&query.centroids)
}

/// Top of the ranking for one query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query: usize,
    pub indices: Vec<usize>,
    pub scores: Vec<f64>,
}

/// Indices of the `cutoff` highest scores, best first, ties broken by
/// ascending index. A cutoff beyond the database size ranks everything.
pub fn rank_top_k<T: Real>(scores: &[T], cutoff: usize) -> Vec<usize> {
    let by_score = |&a: &usize, &b: &usize| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    };
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let keep = cutoff.min(idx.len());
    if keep == 0 {
        return Vec::new();
    }
    if keep < idx.len() {
        idx.select_nth_unstable_by(keep - 1, by_score);
        idx.truncate(keep);
    }
    idx.sort_unstable_by(by_score);
    idx
}

impl RankedList {
    pub fn from_scores<T: Real>(query: usize, scores: &[T], cutoff: usize) -> Self {
        let indices = rank_top_k(scores, cutoff);
        let scores = indices.iter().map(|&i| scores[i].to_f64_lossless()).collect();
        Self { query, indices, scores }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_examples() {
        assert_eq!(rank_top_k(&[0.1, 0.9, 0.5], 2), vec![1, 2]);
        assert_eq!(rank_top_k(&[0.3; 5], 3), vec![0, 1, 2]);
        assert_eq!(rank_top_k(&[0.3, 0.1], 10), vec![0, 1]);
        assert!(rank_top_k::<f64>(&[], 3).is_empty());
    }

    #[test]
    fn neg_infinity_ranks_last() {
        assert_eq!(rank_top_k(&[f64::NEG_INFINITY, -0.5, 0.2], 3), vec![2, 1, 0]);
    }

    #[test]
    fn max_over_centroids() {
        let db = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        let c = Matrix::from_rows(&[vec![0.0, 1.0], vec![3.0, 0.0]]).unwrap();
        let s = ScoringIndex::new(&db).score(&c).unwrap();
        assert_eq!(&s.values[..2], &[1.0, 1.0]);
        assert_eq!(s.values[2], f64::NEG_INFINITY);
        assert_eq!(s.degenerate_rows, 1);
    }

    #[test]
    fn zero_centroids_rejected() {
        let db = Matrix::<f64>::identity(2);
        assert!(matches!(
            ScoringIndex::new(&db).score(&Matrix::zeros(1, 2)),
            Err(Error::Degenerate(_))
        ));
        assert!(ScoringIndex::new(&db).score(&Matrix::zeros(1, 3)).is_err());
    }
}
