//! Query-time pipeline: generate candidates for a sketch, cluster them,
//! rank the database by best cosine similarity to any cluster centre, and
//! score the rankings.

mod evaluate;
mod generator;
mod metrics;
mod rank;

pub use evaluate::{
    evaluate_run, retrieve, MetricsReport, MetricsSummary, QueryMetrics, Retrieval, RetrievalConfig, MAP_DEFINITION,
};
pub use generator::FeatureGenerator;
pub use metrics::{average_precision_at_k, precision_at_k};
pub use rank::{
    build_query_representation, rank_top_k, score_database, QueryRepresentation, RankedList, Scores, ScoringIndex,
    DEFAULT_CLUSTERS, DEFAULT_CUTOFF, DEFAULT_SAMPLES,
};
