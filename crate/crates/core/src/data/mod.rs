//! Feature files, zero-shot splits, synthetic benchmarks and checkpoints.

mod checkpoint;
mod features;
mod split;
mod synth;

pub use checkpoint::{
    fnv1a64, load_checkpoint, save_checkpoint, Checkpoint, ModelKind, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use features::{
    class_index, decode_features, encode_features, format_labels, load_features, parse_labels, read_features,
    read_labels, write_features, write_labels, FeatureRole, FeatureStore, FEATURE_MAGIC, FEATURE_VERSION,
};
pub use split::{make_zero_shot_split, PairedDataset, SplitManifest, SplitStats, ZeroShotSplit};
pub use synth::{class_name, synth_generate, SyntheticConfig, SyntheticData};
