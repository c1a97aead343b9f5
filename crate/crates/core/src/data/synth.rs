//! Synthetic benchmark with a class-agnostic sketch/image relation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};

use super::features::{FeatureRole, FeatureStore};
use super::split::{PairedDataset, SplitManifest};

const STREAM_PROTOTYPES: u64 = 0;
const STREAM_PROJECTION: u64 = 1;
const STREAM_PAIRS: u64 = 2;
const STREAM_DATABASE: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_classes_train: usize,
    pub n_classes_test: usize,
    pub d_img: usize,
    pub d_sketch: usize,
    pub pairs_per_class: usize,
    /// Database images per class, for train and test classes alike.
    pub db_per_class: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_classes_train", self.n_classes_train),
            ("n_classes_test", self.n_classes_test),
            ("d_img", self.d_img),
            ("d_sketch", self.d_sketch),
            ("pairs_per_class", self.pairs_per_class),
            ("db_per_class", self.db_per_class),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be >= 1")));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes_train + self.n_classes_test
    }
}

pub fn class_name(c: usize) -> String {
    format!("class{c:03}")
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub paired: PairedDataset,
    pub database: FeatureStore,
    /// Train classes first, then the held-out test classes.
    pub manifest: SplitManifest,
    /// Class prototypes, one row per class in class order.
    pub prototypes: Matrix<f64>,
    /// Sketch projection, `d_sketch × d_img`.
    pub projection: Matrix<f64>,
}

/// Per class `c`: prototype `p_c ~ N(0, I)`; image `x = p_c + ε` with
/// `ε ~ N(0, σ²I)`; paired sketch `P·x + ε''` with `ε'' ~ N(0, σ²I)` and a
/// single projection `P` with entries `N(0, 1/d_img)` shared by all classes.
/// Database images are fresh draws `p_c + ε`. The last `n_classes_test`
/// classes are the suggested test classes.
pub fn synth_generate(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let (n_cls, di, ds, sigma) = (cfg.n_classes(), cfg.d_img, cfg.d_sketch, cfg.noise_sigma);

    let mut rng = Rng::with_stream(cfg.seed, STREAM_PROTOTYPES);
    let prototypes = Matrix::from_fn(n_cls, di, |_, _| rng.normal());
    let mut rng = Rng::with_stream(cfg.seed, STREAM_PROJECTION);
    let scale = 1.0 / (di as f64).sqrt();
    let projection = Matrix::from_fn(ds, di, |_, _| rng.normal() * scale);

    let n_pairs = n_cls * cfg.pairs_per_class;
    let mut rng = Rng::with_stream(cfg.seed, STREAM_PAIRS);
    let image = Matrix::from_fn(n_pairs, di, |r, c| {
        prototypes[(r / cfg.pairs_per_class, c)] + sigma * rng.normal()
    });
    let mut sketch = image.matmul_t(&projection)?;
    for v in sketch.as_mut_slice() {
        *v += sigma * rng.normal();
    }
    let labels = (0..n_pairs).map(|r| class_name(r / cfg.pairs_per_class)).collect();

    let n_db = n_cls * cfg.db_per_class;
    let mut rng = Rng::with_stream(cfg.seed, STREAM_DATABASE);
    let db = Matrix::from_fn(n_db, di, |r, c| prototypes[(r / cfg.db_per_class, c)] + sigma * rng.normal());
    let db_labels = (0..n_db).map(|r| class_name(r / cfg.db_per_class)).collect();

    Ok(SyntheticData {
        paired: PairedDataset::new(sketch, image, labels)?,
        database: FeatureStore::new(db, db_labels, FeatureRole::Database)?,
        manifest: SplitManifest {
            train_classes: (0..cfg.n_classes_train).map(class_name).collect(),
            test_classes: (cfg.n_classes_train..n_cls).map(class_name).collect(),
        },
        prototypes,
        projection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(sigma: f64, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            n_classes_train: 3,
            n_classes_test: 2,
            d_img: 6,
            d_sketch: 3,
            pairs_per_class: 4,
            db_per_class: 5,
            noise_sigma: sigma,
            seed,
        }
    }

    #[test]
    fn noiseless_images_equal_prototypes() {
        let d = synth_generate(&cfg(0.0, 1)).unwrap();
        for r in 0..d.paired.len() {
            assert_eq!(d.paired.image.row(r), d.prototypes.row(r / 4));
            let s = d.projection.mat_vec(d.paired.image.row(r)).unwrap();
            assert_eq!(d.paired.sketch.row(r), &s[..]);
        }
    }

    #[test]
    fn shapes_labels_and_manifest() {
        let d = synth_generate(&cfg(0.1, 2)).unwrap();
        assert_eq!(d.paired.sketch.shape(), (20, 3));
        assert_eq!(d.database.features.shape(), (25, 6));
        assert_eq!(d.paired.labels[4], "class001");
        assert_eq!(d.manifest.test_classes, vec!["class003", "class004"]);
        d.manifest.validate().unwrap();
    }

    #[test]
    fn seeded() {
        let a = synth_generate(&cfg(0.1, 3)).unwrap();
        let b = synth_generate(&cfg(0.1, 3)).unwrap();
        assert_eq!(a.paired, b.paired);
        assert_eq!(a.database, b.database);
        let c = synth_generate(&cfg(0.1, 4)).unwrap();
        assert_ne!(a.prototypes, c.prototypes);
    }

    #[test]
    fn invalid_config() {
        let mut c = cfg(0.1, 0);
        c.d_sketch = 0;
        assert!(synth_generate(&c).is_err());
        let c = cfg(-1.0, 0);
        assert!(synth_generate(&c).is_err());
    }
}
