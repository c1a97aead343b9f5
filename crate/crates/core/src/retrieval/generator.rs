use crate::baselines::{EmbeddingPair, LinearMap};
use crate::error::{Error, Result};
use crate::generative::{CaaeModel, CvaeModel};
use crate::linalg::{Matrix, Rng};
use crate::scalar::Real;

/// Anything that turns a sketch feature into candidate vectors in the space
/// the database is searched in.
pub trait FeatureGenerator<T: Real>: Sync {
    /// Short model identifier echoed into reports.
    fn source(&self) -> String;

    fn d_sketch(&self) -> usize;

    /// `n` candidates for one sketch. Deterministic generators may return a
    /// single row regardless of `n`.
    fn generate(&self, sketch: &[T], n: usize, rng: &mut Rng) -> Result<Matrix<T>>;

    /// Whether repeated draws differ. Deterministic generators skip
    /// clustering.
    fn is_stochastic(&self) -> bool;

    /// Maps raw database features into the search space, if it differs from
    /// the raw feature space.
    fn project_database(&self, db: &Matrix<T>) -> Result<Option<Matrix<T>>> {
        let _ = db;
        Ok(None)
    }
}

impl<T: Real> FeatureGenerator<T> for CvaeModel<T> {
    fn source(&self) -> String {
        "cvae".into()
    }

    fn d_sketch(&self) -> usize {
        CvaeModel::d_sketch(self)
    }

    fn generate(&self, sketch: &[T], n: usize, rng: &mut Rng) -> Result<Matrix<T>> {
        CvaeModel::generate(self, sketch, n, rng)
    }

    fn is_stochastic(&self) -> bool {
        true
    }
}

impl<T: Real> FeatureGenerator<T> for CaaeModel<T> {
    fn source(&self) -> String {
        "caae".into()
    }

    fn d_sketch(&self) -> usize {
        CaaeModel::d_sketch(self)
    }

    fn generate(&self, sketch: &[T], n: usize, rng: &mut Rng) -> Result<Matrix<T>> {
        CaaeModel::generate(self, sketch, n, rng)
    }

    fn is_stochastic(&self) -> bool {
        true
    }
}

impl<T: Real> FeatureGenerator<T> for LinearMap<T> {
    fn source(&self) -> String {
        self.meta.method.name().into()
    }

    fn d_sketch(&self) -> usize {
        LinearMap::d_sketch(self)
    }

    fn generate(&self, sketch: &[T], _n: usize, _rng: &mut Rng) -> Result<Matrix<T>> {
        Matrix::from_vec(1, self.d_img(), self.predict_one(sketch)?)
    }

    fn is_stochastic(&self) -> bool {
        false
    }
}

impl<T: Real> FeatureGenerator<T> for EmbeddingPair<T> {
    fn source(&self) -> String {
        self.loss.name().into()
    }

    fn d_sketch(&self) -> usize {
        EmbeddingPair::d_sketch(self)
    }

    fn generate(&self, sketch: &[T], _n: usize, _rng: &mut Rng) -> Result<Matrix<T>> {
        if sketch.len() != self.d_sketch() {
            return Err(Error::dim("embed sketch", self.d_sketch(), sketch.len()));
        }
        self.embed_sketch(&Matrix::from_vec(1, sketch.len(), sketch.to_vec())?)
    }

    fn is_stochastic(&self) -> bool {
        false
    }

    fn project_database(&self, db: &Matrix<T>) -> Result<Option<Matrix<T>>> {
        if db.cols() != self.d_img() {
            return Err(Error::dim("embed database", self.d_img(), db.cols()));
        }
        Ok(Some(self.embed_image(db)?))
    }
}
