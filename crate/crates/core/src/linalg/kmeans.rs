//! Lloyd's k-means.
//!
//! Initial centroids are `k` distinct rows drawn uniformly with the caller's
//! generator. A cluster that loses all its members is reseeded with the point
//! farthest from its current centroid. Iteration stops once no centroid moves
//! more than [`KMEANS_TOLERANCE`] or after [`KMEANS_MAX_ITERS`] rounds.

use super::matrix::sq_dist;
use super::{Matrix, Rng};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const KMEANS_TOLERANCE: f64 = 1e-6;
pub const KMEANS_MAX_ITERS: usize = 100;

#[derive(Clone, Debug)]
pub struct KMeans<T = f64> {
    pub centroids: Matrix<T>,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares after every assignment step.
    pub objective_trace: Vec<T>,
    pub iterations: usize,
}

impl<T: Real> KMeans<T> {
    pub fn objective(&self) -> T {
        *self.objective_trace.last().unwrap()
    }
}

/// Assigns every point to its nearest centroid (ties to the lower index) and
/// returns the assignments, per-point squared distances and their sum.
fn assign<T: Real>(points: &Matrix<T>, centroids: &Matrix<T>) -> (Vec<usize>, Vec<T>, T) {
    let mut labels = Vec::with_capacity(points.rows());
    let mut dists = Vec::with_capacity(points.rows());
    let mut total = T::zero();
    for p in points.row_iter() {
        let (best, d) = centroids
            .row_iter()
            .map(|c| sq_dist(p, c))
            .enumerate()
            .fold((0, T::infinity()), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });
        labels.push(best);
        dists.push(d);
        total += d;
    }
    (labels, dists, total)
}

pub fn kmeans<T: Real>(points: &Matrix<T>, k: usize, rng: &mut Rng) -> Result<KMeans<T>> {
    let n = points.rows();
    if k == 0 || n < k {
        return Err(Error::Cardinality {
            what: "k-means points",
            needed: k.max(1),
            got: n,
        });
    }
    let d = points.cols();
    let mut centroids = points.select_rows(&rng.choose_distinct(n, k));
    let tol = T::lit(KMEANS_TOLERANCE);

    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let (labels, dists, objective) = assign(points, &centroids);
        trace.push(objective);
        if iterations == KMEANS_MAX_ITERS {
            return Ok(KMeans {
                centroids,
                assignments: labels,
                objective_trace: trace,
                iterations,
            });
        }
        iterations += 1;

        let mut sums = Matrix::<T>::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (p, &c) in points.row_iter().zip(&labels) {
            counts[c] += 1;
            for (s, &v) in sums.row_mut(c).iter_mut().zip(p) {
                *s += v;
            }
        }

        let mut updated = sums;
        let mut taken = vec![false; n];
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let inv = T::one() / T::from_usize(count).unwrap();
                updated.row_mut(c).iter_mut().for_each(|v| *v *= inv);
            } else {
                // farthest point from its centroid, lowest index on ties
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if dists[b] >= dists[i] => Some(b),
                        _ => Some(i),
                    })
                    .expect("n >= k leaves a point to reseed with");
                taken[far] = true;
                updated.row_mut(c).copy_from_slice(points.row(far));
            }
        }

        let shift = (0..k)
            .map(|c| sq_dist(updated.row(c), centroids.row(c)).sqrt())
            .fold(T::zero(), T::max);
        centroids = updated;
        if shift < tol {
            let (labels, _, objective) = assign(points, &centroids);
            trace.push(objective);
            return Ok(KMeans {
                centroids,
                assignments: labels,
                objective_trace: trace,
                iterations,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cluster_is_the_mean() {
        let mut rng = Rng::new(4);
        let pts = Matrix::from_fn(30, 3, |_, _| rng.normal());
        let km = kmeans(&pts, 1, &mut rng).unwrap();
        let mean = pts.column_means();
        for (a, b) in km.centroids.row(0).iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_blobs_are_recovered() {
        let mut rng = Rng::new(10);
        let pts = Matrix::from_fn(200, 2, |r, _| {
            let centre = if r % 2 == 0 { 0.0 } else { 10.0 };
            centre + 0.1 * rng.normal()
        });
        let km = kmeans(&pts, 2, &mut rng).unwrap();
        let mut found: Vec<f64> = (0..2).map(|c| km.centroids[(c, 0)]).collect();
        found.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(found[0].abs() < 0.2 && (found[1] - 10.0).abs() < 0.2, "{found:?}");
    }

    #[test]
    fn k_equals_n_has_zero_objective() {
        let mut rng = Rng::new(2);
        let pts = Matrix::from_fn(6, 2, |_, _| rng.normal());
        let km = kmeans(&pts, 6, &mut rng).unwrap();
        assert_eq!(km.objective(), 0.0);
    }

    #[test]
    fn objective_never_increases() {
        for seed in 0..10 {
            let mut rng = Rng::new(seed);
            let pts = Matrix::from_fn(80, 4, |r, _| (r % 5) as f64 + rng.normal());
            let km = kmeans(&pts, 5, &mut rng).unwrap();
            for w in km.objective_trace.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", km.objective_trace);
            }
        }
    }

    #[test]
    fn duplicate_points_reseed_empty_clusters() {
        let pts = Matrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0], vec![5.0]]).unwrap();
        let km = kmeans(&pts, 3, &mut Rng::new(0)).unwrap();
        assert!(km.centroids.is_finite());
        assert_eq!(km.objective(), 0.0);
    }

    #[test]
    fn too_few_points() {
        let pts = Matrix::<f64>::zeros(2, 2);
        assert!(matches!(
            kmeans(&pts, 3, &mut Rng::new(0)),
            Err(Error::Cardinality { .. })
        ));
    }
}
