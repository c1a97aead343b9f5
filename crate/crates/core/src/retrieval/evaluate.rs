use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::scalar::Real;

use super::generator::FeatureGenerator;
use super::metrics::{average_precision_at_k, precision_at_k};
use super::rank::{
    build_query_representation, RankedList, ScoringIndex, DEFAULT_CLUSTERS, DEFAULT_CUTOFF, DEFAULT_SAMPLES,
};

/// Echoed in every report so readers know which AP normalization was used.
pub const MAP_DEFINITION: &str =
    "AP@k = sum over relevant ranks i <= k of Precision@i, divided by min(R, k) where R = relevant items in the database";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    /// Candidates generated per query.
    pub n_samples: usize,
    pub k_clusters: usize,
    /// Ranked-list length and the K of Precision@K / mAP@K.
    pub cutoff: usize,
    pub seed: u64,
    /// Evaluate queries on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl RetrievalConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            n_samples: DEFAULT_SAMPLES,
            k_clusters: DEFAULT_CLUSTERS,
            cutoff: DEFAULT_CUTOFF,
            seed,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cutoff == 0 {
            return Err(Error::Config("cutoff must be >= 1".into()));
        }
        if self.k_clusters == 0 || self.n_samples < self.k_clusters {
            return Err(Error::Config(format!(
                "need n_samples >= k_clusters >= 1, got {} and {}",
                self.n_samples, self.k_clusters
            )));
        }
        Ok(())
    }
}

/// Rankings for a batch of queries.
#[derive(Clone, Debug, PartialEq)]
pub struct Retrieval {
    pub rankings: Vec<RankedList>,
    /// Zero-norm database rows, ranked last for every query.
    pub degenerate_db_rows: usize,
}

/// Generate, cluster, score and rank every query row against `db`. Query
/// `i` draws from stream `i` of the configured seed, so results are the
/// same with or without parallelism.
pub fn retrieve<T: Real, G: FeatureGenerator<T> + ?Sized>(
    queries: &Matrix<T>,
    db: &Matrix<T>,
    generator: &G,
    cfg: &RetrievalConfig,
) -> Result<Retrieval> {
    cfg.validate()?;
    if db.rows() == 0 {
        return Err(Error::Config("empty database".into()));
    }
    if queries.rows() == 0 {
        return Err(Error::Config("empty query set".into()));
    }
    if queries.cols() != generator.d_sketch() {
        return Err(Error::dim("query features", generator.d_sketch(), queries.cols()));
    }
    let projected = generator.project_database(db)?;
    let space = projected.as_ref().unwrap_or(db);
    let index = ScoringIndex::new(space);

    let run_one = |i: usize| -> Result<(RankedList, usize)> {
        let mut rng = Rng::with_stream(cfg.seed, i as u64);
        let q = build_query_representation(generator, queries.row(i), cfg.n_samples, cfg.k_clusters, &mut rng)?;
        let scores = index.score(&q.centroids)?;
        Ok((RankedList::from_scores(i, &scores.values, cfg.cutoff), scores.degenerate_rows))
    };
    let results: Vec<(RankedList, usize)> = if cfg.parallel {
        (0..queries.rows()).into_par_iter().map(run_one).collect::<Result<_>>()?
    } else {
        (0..queries.rows()).map(run_one).collect::<Result<_>>()?
    };
    let degenerate_db_rows = results.first().map_or(0, |r| r.1);
    Ok(Retrieval {
        rankings: results.into_iter().map(|r| r.0).collect(),
        degenerate_db_rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub query: usize,
    pub class: String,
    pub precision_at_k: f64,
    pub ap_at_k: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub source: String,
    pub queries: usize,
    pub cutoff: usize,
    pub mean_precision_at_k: f64,
    pub map_at_k: f64,
    pub map_definition: String,
    pub degenerate_db_rows: usize,
    pub config: RetrievalConfig,
    /// Caller-supplied run parameters echoed verbatim.
    pub run: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub per_query: Vec<QueryMetrics>,
    pub summary: MetricsSummary,
}

impl MetricsReport {
    /// One JSON object per query line, then a `{"summary": …}` footer line.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for q in &self.per_query {
            serde_json::to_writer(&mut out, q)?;
            out.write_all(b"\n")?;
        }
        #[derive(Serialize)]
        struct Footer<'a> {
            summary: &'a MetricsSummary,
        }
        serde_json::to_writer(&mut out, &Footer { summary: &self.summary })?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

/// Retrieval plus Precision@K and mAP@K over labelled queries.
pub fn evaluate_run<T: Real, G: FeatureGenerator<T> + ?Sized>(
    queries: &Matrix<T>,
    query_labels: &[String],
    db: &Matrix<T>,
    db_labels: &[String],
    generator: &G,
    cfg: &RetrievalConfig,
) -> Result<(MetricsReport, Retrieval)> {
    if query_labels.len() != queries.rows() {
        return Err(Error::Consistency(format!(
            "{} query labels for {} queries",
            query_labels.len(),
            queries.rows()
        )));
    }
    if db_labels.len() != db.rows() {
        return Err(Error::Consistency(format!(
            "{} database labels for {} rows",
            db_labels.len(),
            db.rows()
        )));
    }
    let retrieval = retrieve(queries, db, generator, cfg)?;
    let mut relevant: HashMap<&str, usize> = HashMap::new();
    for l in db_labels {
        *relevant.entry(l.as_str()).or_default() += 1;
    }
    let per_query: Vec<QueryMetrics> = retrieval
        .rankings
        .iter()
        .map(|r| {
            let class = &query_labels[r.query];
            let ranked: Vec<&String> = r.indices.iter().map(|&i| &db_labels[i]).collect();
            let total = relevant.get(class.as_str()).copied().unwrap_or(0);
            QueryMetrics {
                query: r.query,
                class: class.clone(),
                precision_at_k: precision_at_k(&ranked, &class, cfg.cutoff),
                ap_at_k: average_precision_at_k(&ranked, &class, cfg.cutoff, total),
            }
        })
        .collect();
    let n = per_query.len() as f64;
    let summary = MetricsSummary {
        source: generator.source(),
        queries: per_query.len(),
        cutoff: cfg.cutoff,
        mean_precision_at_k: per_query.iter().map(|q| q.precision_at_k).sum::<f64>() / n,
        map_at_k: per_query.iter().map(|q| q.ap_at_k).sum::<f64>() / n,
        map_definition: MAP_DEFINITION.into(),
        degenerate_db_rows: retrieval.degenerate_db_rows,
        config: cfg.clone(),
        run: BTreeMap::new(),
    };
    Ok((MetricsReport { per_query, summary }, retrieval))
}
