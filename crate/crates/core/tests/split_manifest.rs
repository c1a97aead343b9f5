use std::collections::BTreeSet;

use zsbir_core::data::{
    class_name, make_zero_shot_split, synth_generate, SplitManifest, SyntheticConfig, ZeroShotSplit,
};
use zsbir_core::linalg::Rng;
use zsbir_core::Error;

fn tiny(n_train: usize, n_test: usize, seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        n_classes_train: n_train,
        n_classes_test: n_test,
        d_img: 3,
        d_sketch: 2,
        pairs_per_class: 2,
        db_per_class: 3,
        noise_sigma: 0.1,
        seed,
    }
}

#[test]
fn sketchy_sized_manifest_dry_run() {
    // Sketchy holds out 21 of 125 classes
    let data = synth_generate(&tiny(104, 21, 7)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("split.json");
    data.manifest.save(&path).unwrap();
    let manifest = SplitManifest::load(&path).unwrap();
    let split = ZeroShotSplit::from_manifest(&data.paired, &data.database, &manifest).unwrap();
    let stats = split.stats();
    assert_eq!(stats.train_classes, 104);
    assert_eq!(stats.test_classes, 21);
    assert_eq!(stats.train_sketches, 104 * 2);
    assert_eq!(stats.test_sketches, 21 * 2);
    assert_eq!(stats.db_train, 104 * 3);
    assert_eq!(stats.db_test, 21 * 3);
}

#[test]
fn random_splits_are_disjoint() {
    let data = synth_generate(&tiny(8, 4, 11)).unwrap();
    let mut rng = Rng::new(3);
    for _ in 0..10 {
        let n_test = 1 + rng.below(11);
        let test: Vec<String> = rng.choose_distinct(12, n_test).into_iter().map(class_name).collect();
        let split = make_zero_shot_split(&data.paired, &data.database, &test).unwrap();
        let tr: BTreeSet<&String> = split.s_tr.labels.iter().chain(&split.d_tr.labels).collect();
        let te: BTreeSet<&String> = split.s_te.labels.iter().chain(&split.d_te.labels).collect();
        assert!(tr.is_disjoint(&te));
        assert_eq!(split.s_tr.len() + split.s_te.len(), data.paired.len());
        assert_eq!(split.d_tr.len() + split.d_te.len(), data.database.len());
        assert_eq!(split.test_classes.len(), n_test);
    }
}

#[test]
fn manifest_file_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, r#"{"train_classes":["a","b"],"test_classes":["b"]}"#).unwrap();
    match SplitManifest::load(&path) {
        Err(Error::Split(msg)) => assert!(msg.ends_with(": b"), "{msg}"),
        other => panic!("expected split error, got {other:?}"),
    }
    std::fs::write(&path, r#"{"train_classes":["a"]"#).unwrap();
    assert!(SplitManifest::load(&path).is_err());
}
