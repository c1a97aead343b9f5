//! `zsbir`: batch entry points for synthetic data, training, retrieval,
//! evaluation and gradient checks.
//!
//! Exit codes: 0 success, 1 invalid input or failed check, 2 numerical
//! failure (divergence, singular system, non-convergence).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use zsbir_core::nn::Activation;

#[derive(Parser, Debug)]
#[command(name = "zsbir", version, about = "Zero-shot sketch-based image retrieval in feature space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset with a train/test class split.
    Synth(SynthArgs),
    /// Train or fit a model on the training classes of a dataset.
    Train(TrainArgs),
    /// Rank database rows for every query sketch.
    Retrieve(RetrieveArgs),
    /// Retrieve and report Precision@K and mAP@K.
    Eval(EvalArgs),
    /// Check analytic gradients and closed-form stationarity.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 12)]
    pub train_classes: usize,
    #[arg(long, default_value_t = 4)]
    pub test_classes: usize,
    #[arg(long, default_value_t = 32)]
    pub d_img: usize,
    #[arg(long, default_value_t = 16)]
    pub d_sketch: usize,
    #[arg(long, default_value_t = 50)]
    pub pairs_per_class: usize,
    #[arg(long, default_value_t = 60)]
    pub db_per_class: usize,
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    Cvae,
    Caae,
    Siamese1,
    Siamese2,
    TripletCoarse,
    TripletFine,
    Regression,
    Eszsl,
    Sae,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationArg {
    Relu,
    Tanh,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Relu => Activation::Relu,
            ActivationArg::Tanh => Activation::Tanh,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    /// Dataset directory as written by `synth`.
    #[arg(long)]
    pub data: PathBuf,
    /// Split manifest [default: <data>/split.json].
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss trace path [default: <out>.trace.jsonl].
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    /// Epochs [default: 25 for cvae, 20 for siamese, 80 for triplet].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Encoder/decoder updates for caae.
    #[arg(long, default_value_t = 6000)]
    pub iterations: usize,
    /// Batch size [default: 64, or 128 for caae].
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, default_value_t = 2e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 16)]
    pub latent: usize,
    /// Comma-separated hidden widths [default: 256,256 generative, 256 embedding].
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value_t = ActivationArg::Relu)]
    pub activation: ActivationArg,
    #[arg(long, default_value_t = 0.1)]
    pub lambda_recons: f64,
    #[arg(long, default_value_t = 32)]
    pub disc_iters: usize,
    /// Use -log D(E(x)) as the encoder's adversarial term.
    #[arg(long)]
    pub nonsaturating: bool,
    #[arg(long, default_value_t = 1e-3)]
    pub ridge: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 64)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub margin: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Query sketch features.
    #[arg(long)]
    pub queries: PathBuf,
    /// Database image features.
    #[arg(long)]
    pub db: PathBuf,
    /// Output path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Generated samples per query.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 5)]
    pub clusters: usize,
    /// Ranked-list length and K of the metrics.
    #[arg(long, default_value_t = 200)]
    pub cutoff: usize,
    /// Evaluate queries one at a time on the calling thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub retrieve: RetrieveArgs,
    #[arg(long)]
    pub query_labels: PathBuf,
    #[arg(long)]
    pub db_labels: PathBuf,
    /// Refuse queries or database rows outside the manifest's test classes.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Also write the ranked lists here.
    #[arg(long)]
    pub rankings: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub seed: u64,
    /// Corrupt the named loss's gradient (harness self-test).
    #[arg(long, hide = true)]
    pub corrupt: Option<String>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<zsbir_core::Error>())
        .any(zsbir_core::Error::is_numerical);
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Retrieve(a) => commands::retrieve(a),
        Command::Eval(a) => commands::eval(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
