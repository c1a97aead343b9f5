use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use zsbir_core::baselines::{fit_direct_regression, fit_eszsl, fit_sae, train_embedding, EmbeddingConfig, EmbeddingLoss};
use zsbir_core::data::{
    class_index, load_checkpoint, read_features, read_labels, save_checkpoint, synth_generate, write_features,
    write_labels, Checkpoint, FeatureRole, FeatureStore, PairedDataset, SplitManifest, SyntheticConfig,
    ZeroShotSplit,
};
use zsbir_core::generative::{train_caae, train_cvae, LossRecord, ModelConfig, TrainConfig, TrainingPairs};
use zsbir_core::gradcheck::{run_gradient_suite, GradCheckOptions};
use zsbir_core::linalg::Matrix;
use zsbir_core::nn::AdamConfig;
use zsbir_core::retrieval::{evaluate_run, retrieve as run_retrieval, FeatureGenerator, RankedList, RetrievalConfig};

use crate::{EvalArgs, GradcheckArgs, ModelArg, RetrieveArgs, SynthArgs, TrainArgs};

pub const PAIRS_SKETCH: &str = "pairs_sketch.zsfv";
pub const PAIRS_IMAGE: &str = "pairs_image.zsfv";
pub const PAIRS_LABELS: &str = "pairs.labels";
pub const DB: &str = "db.zsfv";
pub const DB_LABELS: &str = "db.labels";
pub const SPLIT: &str = "split.json";
pub const QUERIES: &str = "queries.zsfv";
pub const QUERY_LABELS: &str = "queries.labels";
pub const DB_TEST: &str = "db_test.zsfv";
pub const DB_TEST_LABELS: &str = "db_test.labels";
pub const SYNTH_CONFIG: &str = "synth.json";

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

/// `{"run": <args>}` as the first line of every JSONL output.
fn write_run_header(out: &mut impl Write, args: &impl Serialize) -> Result<()> {
    #[derive(Serialize)]
    struct Header<'a, A> {
        run: &'a A,
    }
    serde_json::to_writer(&mut *out, &Header { run: args })?;
    out.write_all(b"\n")?;
    Ok(())
}

fn run_echo(args: &impl Serialize) -> Result<BTreeMap<String, String>> {
    let value = serde_json::to_value(args)?;
    let mut out = BTreeMap::new();
    flatten_echo("", &value, &mut out);
    Ok(out)
}

fn flatten_echo(prefix: &str, v: &serde_json::Value, out: &mut BTreeMap<String, String>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                flatten_echo(k, v, out);
            }
        }
        serde_json::Value::String(s) => {
            out.insert(prefix.to_string(), s.clone());
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        n_classes_train: a.train_classes,
        n_classes_test: a.test_classes,
        d_img: a.d_img,
        d_sketch: a.d_sketch,
        pairs_per_class: a.pairs_per_class,
        db_per_class: a.db_per_class,
        noise_sigma: a.sigma,
        seed: a.seed,
    };
    let data = synth_generate(&cfg)?;
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let p = |name: &str| a.out.join(name);
    write_features(p(PAIRS_SKETCH), &data.paired.sketch)?;
    write_features(p(PAIRS_IMAGE), &data.paired.image)?;
    write_labels(p(PAIRS_LABELS), &data.paired.labels)?;
    data.database.save(p(DB), p(DB_LABELS))?;
    data.manifest.save(p(SPLIT))?;

    let split = ZeroShotSplit::from_manifest(&data.paired, &data.database, &data.manifest)?;
    split.s_te.sketches().save(p(QUERIES), p(QUERY_LABELS))?;
    split.d_te.save(p(DB_TEST), p(DB_TEST_LABELS))?;

    let mut f = create(&p(SYNTH_CONFIG))?;
    serde_json::to_writer_pretty(&mut f, &cfg)?;
    f.write_all(b"\n")?;
    f.flush()?;

    let s = split.stats();
    println!(
        "wrote {}: {} train / {} test classes, {} train and {} test sketches, {} train and {} test database images",
        a.out.display(),
        s.train_classes,
        s.test_classes,
        s.train_sketches,
        s.test_sketches,
        s.db_train,
        s.db_test
    );
    Ok(())
}

fn load_training_split(a: &TrainArgs) -> Result<ZeroShotSplit> {
    let dir = &a.data;
    let paired = PairedDataset::load(dir.join(PAIRS_SKETCH), dir.join(PAIRS_IMAGE), dir.join(PAIRS_LABELS))
        .with_context(|| format!("loading paired features from {}", dir.display()))?;
    let db = if dir.join(DB).exists() {
        FeatureStore::new(read_features(dir.join(DB))?, read_labels(dir.join(DB_LABELS))?, FeatureRole::Database)?
    } else {
        FeatureStore::new(Matrix::zeros(0, paired.image.cols()), Vec::new(), FeatureRole::Database)?
    };
    let split_path = a.split.clone().unwrap_or_else(|| dir.join(SPLIT));
    let manifest =
        SplitManifest::load(&split_path).with_context(|| format!("split manifest {}", split_path.display()))?;
    let split = ZeroShotSplit::from_manifest(&paired, &db, &manifest)?;
    // training sees s_tr only; re-check before anything is fit
    split.check_training_labels(&split.s_tr.labels)?;
    if split.s_tr.is_empty() {
        bail!("no training pairs for the manifest's train classes");
    }
    Ok(split)
}

fn model_config(a: &TrainArgs, d_img: usize, d_sketch: usize) -> ModelConfig {
    let mut cfg = ModelConfig::new(d_img, d_sketch, a.latent);
    if let Some(h) = &a.hidden {
        cfg.hidden = h.clone();
    }
    cfg.activation = a.activation.into();
    cfg.lambda_recons = a.lambda_recons;
    cfg.nonsaturating = a.nonsaturating;
    cfg
}

fn adam(a: &TrainArgs) -> AdamConfig {
    AdamConfig {
        lr: a.lr,
        beta1: a.beta1,
        beta2: a.beta2,
        ..AdamConfig::default()
    }
}

fn embedding_loss(m: ModelArg) -> Option<EmbeddingLoss> {
    Some(match m {
        ModelArg::Siamese1 => EmbeddingLoss::Siamese1,
        ModelArg::Siamese2 => EmbeddingLoss::Siamese2,
        ModelArg::TripletCoarse => EmbeddingLoss::TripletCoarse,
        ModelArg::TripletFine => EmbeddingLoss::TripletFine,
        _ => return None,
    })
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let split = load_training_split(a)?;
    let s_tr = &split.s_tr;
    let data = TrainingPairs::new(&s_tr.sketch, &s_tr.image)?;
    let (d_img, d_sketch) = (s_tr.image.cols(), s_tr.sketch.cols());

    let trace_path = a
        .trace
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.trace.jsonl", a.out.display())));
    let mut trace_out = create(&trace_path)?;
    write_run_header(&mut trace_out, a)?;

    let (checkpoint, trace): (Checkpoint, Vec<LossRecord>) = match a.model {
        ModelArg::Cvae => {
            let mut t = TrainConfig::cvae(a.seed);
            t.epochs = a.epochs.unwrap_or(t.epochs);
            t.batch_size = a.batch_size.unwrap_or(t.batch_size);
            t.adam = adam(a);
            let r = train_cvae(data, &model_config(a, d_img, d_sketch), &t)?;
            (Checkpoint::Cvae(r.model), r.trace)
        }
        ModelArg::Caae => {
            let mut t = TrainConfig::caae(a.seed);
            t.iterations = a.iterations;
            t.batch_size = a.batch_size.unwrap_or(t.batch_size);
            t.disc_iters_per_gen = a.disc_iters;
            t.adam = adam(a);
            let r = train_caae(data, &model_config(a, d_img, d_sketch), &t)?;
            (Checkpoint::Caae(r.model), r.trace)
        }
        ModelArg::Regression | ModelArg::Eszsl | ModelArg::Sae => {
            let map = match a.model {
                ModelArg::Regression => fit_direct_regression(&s_tr.sketch, &s_tr.image, a.ridge)?,
                ModelArg::Eszsl => fit_eszsl(&s_tr.sketch, &s_tr.image, a.gamma, a.lambda)?,
                _ => fit_sae(&s_tr.sketch, &s_tr.image, a.lambda)?,
            };
            #[derive(Serialize)]
            struct Fit<'a> {
                fit: &'a zsbir_core::baselines::FitMeta,
            }
            serde_json::to_writer(&mut trace_out, &Fit { fit: &map.meta })?;
            trace_out.write_all(b"\n")?;
            (Checkpoint::Linear(map), Vec::new())
        }
        kind => {
            let loss = embedding_loss(kind).expect("remaining kinds are embeddings");
            let mut cfg = EmbeddingConfig::new(loss, a.seed);
            cfg.embed_dim = a.embed_dim;
            if let Some(h) = &a.hidden {
                cfg.hidden = h.clone();
            }
            cfg.activation = a.activation.into();
            cfg.margin = a.margin;
            cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
            cfg.batch_size = a.batch_size.unwrap_or(cfg.batch_size);
            cfg.adam = adam(a);
            let (_, ids) = class_index(&s_tr.labels);
            let r = train_embedding(data, &ids, &cfg)?;
            (Checkpoint::Embedding(r.model), r.trace)
        }
    };
    for rec in &trace {
        serde_json::to_writer(&mut trace_out, rec)?;
        trace_out.write_all(b"\n")?;
    }
    trace_out.flush()?;
    save_checkpoint(&a.out, &checkpoint).with_context(|| format!("writing {}", a.out.display()))?;

    let last = trace.last().map(|r| {
        let parts: Vec<String> = r.components.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
        format!(", final {}", parts.join(" "))
    });
    println!(
        "trained {} on {} pairs from {} classes{}",
        serde_json::to_value(a.model)?.as_str().unwrap_or_default(),
        s_tr.len(),
        split.train_classes.len(),
        last.unwrap_or_default()
    );
    Ok(())
}

fn generator(ck: &Checkpoint) -> &dyn FeatureGenerator<f64> {
    match ck {
        Checkpoint::Cvae(m) => m,
        Checkpoint::Caae(m) => m,
        Checkpoint::Linear(m) => m,
        Checkpoint::Embedding(m) => m,
    }
}

fn retrieval_config(a: &RetrieveArgs) -> RetrievalConfig {
    RetrievalConfig {
        n_samples: a.samples,
        k_clusters: a.clusters,
        cutoff: a.cutoff,
        seed: a.seed,
        parallel: !a.sequential,
    }
}

fn write_rankings(path: &Path, args: &impl Serialize, rankings: &[RankedList]) -> Result<()> {
    let mut out = create(path)?;
    write_run_header(&mut out, args)?;
    for r in rankings {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn retrieve(a: &RetrieveArgs) -> Result<()> {
    let ck = load_checkpoint(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let queries = read_features(&a.queries).with_context(|| format!("reading {}", a.queries.display()))?;
    let db = read_features(&a.db).with_context(|| format!("reading {}", a.db.display()))?;
    let r = run_retrieval(&queries, &db, generator(&ck), &retrieval_config(a))?;
    write_rankings(&a.out, a, &r.rankings)?;
    if r.degenerate_db_rows > 0 {
        eprintln!("warning: {} zero-norm database rows ranked last", r.degenerate_db_rows);
    }
    println!("ranked {} queries against {} database rows", queries.rows(), db.rows());
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let ra = &a.retrieve;
    let ck = load_checkpoint(&ra.checkpoint).with_context(|| format!("loading {}", ra.checkpoint.display()))?;
    let queries = FeatureStore::new(read_features(&ra.queries)?, read_labels(&a.query_labels)?, FeatureRole::Sketch)?;
    let db = FeatureStore::new(read_features(&ra.db)?, read_labels(&a.db_labels)?, FeatureRole::Database)?;
    if let Some(path) = &a.split {
        let manifest = SplitManifest::load(path).with_context(|| format!("split manifest {}", path.display()))?;
        let stray = queries
            .labels
            .iter()
            .chain(&db.labels)
            .find(|l| !manifest.test_classes.contains(l));
        if let Some(l) = stray {
            return Err(zsbir_core::Error::Split(format!(
                "evaluation data contains class {l:?}, which is not a test class"
            ))
            .into());
        }
    }
    let (mut report, retrieval) = evaluate_run(
        &queries.features,
        &queries.labels,
        &db.features,
        &db.labels,
        generator(&ck),
        &retrieval_config(ra),
    )?;
    report.summary.run = run_echo(a)?;
    let mut out = create(&ra.out)?;
    report.write_jsonl(&mut out)?;
    out.flush()?;
    if let Some(path) = &a.rankings {
        write_rankings(path, a, &retrieval.rankings)?;
    }
    let s = &report.summary;
    println!(
        "{}: {} queries, precision@{} {:.4}, mAP@{} {:.4}",
        s.source, s.queries, s.cutoff, s.mean_precision_at_k, s.cutoff, s.map_at_k
    );
    Ok(())
}

pub fn gradcheck(a: &GradcheckArgs) -> Result<()> {
    let mut opts = GradCheckOptions::new(a.seed);
    opts.corrupt = a.corrupt.clone();
    let rows = run_gradient_suite(&opts)?;
    println!("{:<22} {:>12} {:>10} {:>7}  result", "loss", "metric", "tolerance", "params");
    for r in &rows {
        println!(
            "{:<22} {:>12.3e} {:>10.0e} {:>7}  {}",
            r.loss,
            r.metric,
            r.tolerance,
            r.checked,
            if r.passed { "pass" } else { "FAIL" }
        );
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed).map(|r| r.loss).collect();
    if !failed.is_empty() {
        bail!("gradient check failed for: {}", failed.join(", "));
    }
    Ok(())
}
