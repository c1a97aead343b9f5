//! Zero-shot class splits and the guard that keeps test classes out of
//! training.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::features::{read_features, read_labels, FeatureRole, FeatureStore};

/// Row-aligned sketch and image features with one label per row.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedDataset {
    pub sketch: Matrix<f64>,
    pub image: Matrix<f64>,
    pub labels: Vec<String>,
}

impl PairedDataset {
    pub fn new(sketch: Matrix<f64>, image: Matrix<f64>, labels: Vec<String>) -> Result<Self> {
        if sketch.rows() != image.rows() || sketch.rows() != labels.len() {
            return Err(Error::Consistency(format!(
                "paired data has {} sketch rows, {} image rows, {} labels",
                sketch.rows(),
                image.rows(),
                labels.len()
            )));
        }
        Ok(Self { sketch, image, labels })
    }

    pub fn load(sketch: impl AsRef<Path>, image: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Self> {
        Self::new(read_features(sketch)?, read_features(image)?, read_labels(labels)?)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn filter(&self, mut keep: impl FnMut(&str) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(&self.labels[i])).collect();
        Self {
            sketch: self.sketch.select_rows(&idx),
            image: self.image.select_rows(&idx),
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }

    pub fn sketches(&self) -> FeatureStore {
        FeatureStore {
            features: self.sketch.clone(),
            labels: self.labels.clone(),
            role: FeatureRole::Sketch,
        }
    }
}

/// Class lists as stored on disk (JSON).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub train_classes: Vec<String>,
    pub test_classes: Vec<String>,
}

impl SplitManifest {
    /// Nonempty, duplicate-free, disjoint class lists.
    pub fn validate(&self) -> Result<()> {
        if self.train_classes.is_empty() || self.test_classes.is_empty() {
            return Err(Error::Config(format!(
                "split needs classes on both sides, got {} train and {} test",
                self.train_classes.len(),
                self.test_classes.len()
            )));
        }
        let train: BTreeSet<&str> = self.train_classes.iter().map(String::as_str).collect();
        let test: BTreeSet<&str> = self.test_classes.iter().map(String::as_str).collect();
        let overlap: Vec<&str> = train.intersection(&test).copied().collect();
        if !overlap.is_empty() {
            return Err(Error::Split(format!(
                "classes listed as both train and test: {}",
                overlap.join(", ")
            )));
        }
        if train.len() != self.train_classes.len() || test.len() != self.test_classes.len() {
            return Err(Error::Config("split manifest lists a class twice".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let m: Self = serde_json::from_slice(&fs::read(path)?)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

/// Sizes of each partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStats {
    pub train_classes: usize,
    pub test_classes: usize,
    pub train_sketches: usize,
    pub test_sketches: usize,
    pub db_train: usize,
    pub db_test: usize,
}

/// Paired data and database partitioned by class. Only `s_tr` and `d_tr`
/// may be used for training.
#[derive(Clone, Debug)]
pub struct ZeroShotSplit {
    pub train_classes: BTreeSet<String>,
    pub test_classes: BTreeSet<String>,
    pub s_tr: PairedDataset,
    pub s_te: PairedDataset,
    pub d_tr: FeatureStore,
    pub d_te: FeatureStore,
}

impl ZeroShotSplit {
    /// Splits with explicit class lists. Every row's class must be listed.
    pub fn from_manifest(paired: &PairedDataset, db: &FeatureStore, manifest: &SplitManifest) -> Result<Self> {
        manifest.validate()?;
        let train: BTreeSet<String> = manifest.train_classes.iter().cloned().collect();
        let test: BTreeSet<String> = manifest.test_classes.iter().cloned().collect();
        let unlisted = paired
            .labels
            .iter()
            .chain(&db.labels)
            .find(|l| !train.contains(*l) && !test.contains(*l));
        if let Some(l) = unlisted {
            return Err(Error::Config(format!("class {l:?} is in the data but not in the split manifest")));
        }
        let split = Self {
            s_tr: paired.filter(|l| train.contains(l)),
            s_te: paired.filter(|l| test.contains(l)),
            d_tr: db.filter(|l| train.contains(l)),
            d_te: db.filter(|l| test.contains(l)),
            train_classes: train,
            test_classes: test,
        };
        split.audit()?;
        Ok(split)
    }

    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            train_classes: self.train_classes.iter().cloned().collect(),
            test_classes: self.test_classes.iter().cloned().collect(),
        }
    }

    pub fn stats(&self) -> SplitStats {
        SplitStats {
            train_classes: self.train_classes.len(),
            test_classes: self.test_classes.len(),
            train_sketches: self.s_tr.len(),
            test_sketches: self.s_te.len(),
            db_train: self.d_tr.len(),
            db_test: self.d_te.len(),
        }
    }

    /// Fails if any label belongs to a test class.
    pub fn check_training_labels<'a>(&self, labels: impl IntoIterator<Item = &'a String>) -> Result<()> {
        for l in labels {
            if self.test_classes.contains(l) {
                return Err(Error::Split(format!("test class {l:?} reached training data")));
            }
        }
        Ok(())
    }

    /// Re-checks every partition invariant.
    pub fn audit(&self) -> Result<()> {
        if let Some(c) = self.train_classes.intersection(&self.test_classes).next() {
            return Err(Error::Split(format!("class {c:?} is both train and test")));
        }
        self.check_training_labels(self.s_tr.labels.iter().chain(&self.d_tr.labels))?;
        let stray = self
            .s_te
            .labels
            .iter()
            .chain(&self.d_te.labels)
            .find(|l| !self.test_classes.contains(*l));
        if let Some(l) = stray {
            return Err(Error::Split(format!("non-test class {l:?} in the test partition")));
        }
        Ok(())
    }
}

/// Holds out `test_classes`; every other observed class is a training class.
pub fn make_zero_shot_split(paired: &PairedDataset, db: &FeatureStore, test_classes: &[String]) -> Result<ZeroShotSplit> {
    let observed: BTreeSet<&String> = paired.labels.iter().chain(&db.labels).collect();
    if let Some(unknown) = test_classes.iter().find(|c| !observed.contains(c)) {
        return Err(Error::Config(format!("test class {unknown:?} does not occur in the data")));
    }
    let test: BTreeSet<&String> = test_classes.iter().collect();
    let manifest = SplitManifest {
        train_classes: observed.iter().filter(|c| !test.contains(*c)).map(|c| (*c).clone()).collect(),
        test_classes: test.iter().map(|c| (*c).clone()).collect(),
    };
    ZeroShotSplit::from_manifest(paired, db, &manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn toy() -> (PairedDataset, FeatureStore) {
        let labels = names(&["a", "b", "c", "a", "b", "c"]);
        let paired = PairedDataset::new(
            Matrix::from_fn(6, 2, |r, c| (r * 2 + c) as f64),
            Matrix::from_fn(6, 3, |r, c| (r * 3 + c) as f64),
            labels.clone(),
        )
        .unwrap();
        let db = FeatureStore::new(Matrix::from_fn(6, 3, |r, _| r as f64), labels, FeatureRole::Database).unwrap();
        (paired, db)
    }

    #[test]
    fn holding_out_all_but_one() {
        let (p, db) = toy();
        let s = make_zero_shot_split(&p, &db, &names(&["b", "c"])).unwrap();
        assert_eq!(s.s_tr.labels, names(&["a", "a"]));
        assert_eq!(s.s_tr.image.row(1), p.image.row(3));
        assert_eq!(
            s.stats(),
            SplitStats {
                train_classes: 1,
                test_classes: 2,
                train_sketches: 2,
                test_sketches: 4,
                db_train: 2,
                db_test: 4,
            }
        );
    }

    #[test]
    fn unknown_or_exhaustive_test_sets_rejected() {
        let (p, db) = toy();
        assert!(matches!(make_zero_shot_split(&p, &db, &names(&["z"])), Err(Error::Config(_))));
        assert!(matches!(make_zero_shot_split(&p, &db, &names(&["a", "b", "c"])), Err(Error::Config(_))));
        assert!(matches!(make_zero_shot_split(&p, &db, &[]), Err(Error::Config(_))));
    }

    #[test]
    fn overlapping_manifest_names_the_overlap() {
        let m = SplitManifest {
            train_classes: names(&["a", "b"]),
            test_classes: names(&["b", "c"]),
        };
        match m.validate() {
            Err(Error::Split(msg)) => assert!(msg.contains('b')),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unlisted_classes_rejected() {
        let (p, db) = toy();
        let m = SplitManifest {
            train_classes: names(&["a"]),
            test_classes: names(&["b"]),
        };
        assert!(matches!(ZeroShotSplit::from_manifest(&p, &db, &m), Err(Error::Config(_))));
    }

    #[test]
    fn guard_rejects_test_labels() {
        let (p, db) = toy();
        let s = make_zero_shot_split(&p, &db, &names(&["c"])).unwrap();
        assert!(s.check_training_labels(&names(&["a", "b"])).is_ok());
        assert!(matches!(s.check_training_labels(&names(&["a", "c"])), Err(Error::Split(_))));
    }
}
