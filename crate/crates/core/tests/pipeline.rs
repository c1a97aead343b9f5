use proptest::prelude::*;
use zsbir_core::baselines::{fit_eszsl, fit_sae};
use zsbir_core::data::{
    load_checkpoint, load_features, save_checkpoint, synth_generate, Checkpoint, FeatureRole, PairedDataset,
    SyntheticConfig, ZeroShotSplit,
};
use zsbir_core::retrieval::{evaluate_run, rank_top_k, RankedList, RetrievalConfig};

#[test]
fn disk_round_trip_preserves_evaluation() {
    let cfg = SyntheticConfig {
        n_classes_train: 6,
        n_classes_test: 3,
        d_img: 10,
        d_sketch: 6,
        pairs_per_class: 15,
        db_per_class: 12,
        noise_sigma: 0.05,
        seed: 21,
    };
    let data = synth_generate(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    zsbir_core::data::write_features(p("s"), &data.paired.sketch).unwrap();
    zsbir_core::data::write_features(p("i"), &data.paired.image).unwrap();
    zsbir_core::data::write_labels(p("l"), &data.paired.labels).unwrap();
    data.database.save(p("db"), p("dbl")).unwrap();

    let paired = PairedDataset::load(p("s"), p("i"), p("l")).unwrap();
    let db = load_features(p("db"), p("dbl"), FeatureRole::Database).unwrap();
    let split = ZeroShotSplit::from_manifest(&paired, &db, &data.manifest).unwrap();

    let map = fit_sae(&split.s_tr.sketch, &split.s_tr.image, 1.0).unwrap();
    save_checkpoint(p("ck"), &Checkpoint::Linear(map.clone())).unwrap();
    let loaded = load_checkpoint(p("ck")).unwrap().into_linear().unwrap();
    assert_eq!(loaded, map);

    let rc = RetrievalConfig::new(4);
    let (s_te, d_te) = (&split.s_te, &split.d_te);
    let (a, _) = evaluate_run(&s_te.sketch, &s_te.labels, &d_te.features, &d_te.labels, &map, &rc).unwrap();
    let (b, _) = evaluate_run(&s_te.sketch, &s_te.labels, &d_te.features, &d_te.labels, &loaded, &rc).unwrap();
    assert_eq!(a.to_jsonl_string(), b.to_jsonl_string());
    // a linear sketch-to-image relation is recovered well by the closed forms
    assert!(a.summary.map_at_k > 0.9, "{}", a.summary.map_at_k);
    let e = fit_eszsl(&split.s_tr.sketch, &split.s_tr.image, 0.1, 0.1).unwrap();
    let (c, _) = evaluate_run(&s_te.sketch, &s_te.labels, &d_te.features, &d_te.labels, &e, &rc).unwrap();
    assert!(c.summary.map_at_k > 0.5, "{}", c.summary.map_at_k);
}

proptest! {
    #[test]
    fn ranking_is_sorted_and_distinct(scores in prop::collection::vec(-5i32..5, 1..60), cutoff in 1usize..80) {
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let list = RankedList::from_scores(0, &scores, cutoff);
        prop_assert_eq!(list.indices.len(), cutoff.min(scores.len()));
        let mut seen = list.indices.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), list.indices.len());
        for w in list.indices.windows(2) {
            let (a, b) = (scores[w[0]], scores[w[1]]);
            prop_assert!(a > b || (a == b && w[0] < w[1]));
        }
        // nothing left out scores above the last kept item
        if let Some(&last) = list.indices.last() {
            for i in (0..scores.len()).filter(|i| !list.indices.contains(i)) {
                prop_assert!(scores[i] < scores[last] || (scores[i] == scores[last] && i > last));
            }
        }
        prop_assert_eq!(rank_top_k(&scores, cutoff), list.indices);
    }
}
