use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use finn_core::data::SplitMode;
use finn_core::layers::Activation;
use finn_core::training::{AdamConfig, TrainConfig};
use finn_core::{ModelConfig, Variant};

#[derive(Parser, Debug)]
#[command(name = "finn", version, about = "CTR models with feature-interaction networks")]
pub struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build vocabulary and bucket artifacts and encode a raw log.
    Preprocess(PreprocessArgs),
    /// Train a model on an encoded dataset.
    Train(TrainArgs),
    /// Print AUC and log loss of a checkpoint on an encoded dataset.
    Evaluate(EvalArgs),
    /// Write one probability per input sample.
    Predict(PredictArgs),
    /// Check backprop against central differences on a small random model.
    Gradcheck(GradcheckArgs),
    /// Train one model per value of a hyperparameter and tabulate the results.
    Sweep(SweepArgs),
    /// Write a synthetic raw log and its schema.
    Generate(GenerateArgs),
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct PreprocessArgs {
    /// Raw delimited input with a header row and a `label` column.
    #[arg(long)]
    pub input: PathBuf,
    /// Schema file: one `name kind` line per field.
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
    #[arg(long = "buckets", default_value_t = 10)]
    pub n_buckets: usize,
    /// Drop negatives until positives make up this fraction.
    #[arg(long)]
    pub target_pos_ratio: Option<f64>,
    /// Hold out part of the data: writes train.tsv and test.tsv instead of
    /// data.tsv; artifacts are fit on the training part only.
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long, value_enum, default_value_t = SplitArg::Random)]
    pub split_mode: SplitArg,
    /// Column delimiter: `tab`, `comma` or a single character.
    #[arg(long, default_value = "tab")]
    pub delimiter: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitArg {
    Random,
    Sequential,
}

impl From<SplitArg> for SplitMode {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Random => SplitMode::Random,
            SplitArg::Sequential => SplitMode::Sequential,
        }
    }
}

/// Architecture knobs shared by `train` and `sweep`.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long, default_value = "finn", value_parser = parse_variant)]
    pub model: Variant,
    #[arg(long, default_value_t = 30)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 10)]
    pub interaction_dim: usize,
    /// Number of hidden layers.
    #[arg(long, default_value_t = 5)]
    pub layers: usize,
    /// Width of every hidden layer.
    #[arg(long, default_value_t = 700)]
    pub neurons: usize,
    /// Explicit hidden widths, e.g. `64,32`; overrides --layers/--neurons.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long, default_value = "relu", value_parser = parse_activation)]
    pub activation: Activation,
    /// Dropout keep probability on the combination layer.
    #[arg(long)]
    pub keep_prob: Option<f64>,
    /// Batch normalization on the combination layer.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub bn: bool,
    /// Half-width of the uniform embedding initialization.
    #[arg(long, default_value_t = 0.01)]
    pub embed_init: f64,
}

impl ModelArgs {
    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.hidden.clone().unwrap_or_else(|| vec![self.neurons; self.layers])
    }

    pub fn to_config(&self, n_features: usize, n_fields: usize, seed: u64) -> ModelConfig {
        let mut c = ModelConfig::new(self.model, n_features, n_fields)
            .with_dims(self.embed_dim, self.interaction_dim, self.hidden_sizes())
            .with_seed(seed);
        c.activation = self.activation;
        c.keep_prob = self.keep_prob;
        c.use_bn = self.bn;
        c.embed_init = self.embed_init;
        c
    }
}

/// Optimizer and loop knobs shared by `train` and `sweep`.
#[derive(Args, Debug, Clone)]
pub struct OptimArgs {
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1000)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.99)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    /// Early-stop after this many epochs without eval-AUC improvement.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Also evaluate every N batches (logged).
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl OptimArgs {
    pub fn to_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                alpha: self.alpha,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
            },
            seed: self.seed,
            patience: self.patience,
            eval_every: self.eval_every,
        }
    }
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    /// Encoded training data (`label<TAB>i0,i1,...`).
    #[arg(long)]
    pub data: PathBuf,
    /// Encoded evaluation data for per-epoch metrics.
    #[arg(long)]
    pub eval: Option<PathBuf>,
    /// Directory holding schema.txt, vocab.tsv and buckets.tsv; defaults to
    /// the directory of --data.
    #[arg(long)]
    pub artifacts: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the per-epoch report (TSV).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Store the Adam moments in the checkpoint too.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub save_optimizer: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub artifacts: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub artifacts: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct GradcheckArgs {
    #[arg(long, default_value = "finn", value_parser = parse_variant)]
    pub model: Variant,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of random instances (seeds seed, seed+1, ...).
    #[arg(long, default_value_t = 1)]
    pub configs: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Held-out data the table is scored on.
    #[arg(long)]
    pub eval: PathBuf,
    #[arg(long)]
    pub artifacts: Option<PathBuf>,
    /// Hyperparameter to vary (e.g. embed-dim, layers, interaction-dim).
    #[arg(long)]
    pub key: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Concurrent trials (default: available cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Also write the table here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    /// Two-field group parity; linear models stay at chance.
    Xor,
    /// Label decided by one field.
    Separable,
    /// Long-tailed fields with planted pairwise and three-way effects.
    Ctr,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: DatasetKind,
    #[arg(long, default_value_t = 10_000)]
    pub rows: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of records given a fresh random label (xor only).
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Categories per field (xor only).
    #[arg(long, default_value_t = 20)]
    pub categories: usize,
    /// Raw output (tab separated, header row).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub schema_out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: finn_core::Error| e.to_string())
}

fn parse_activation(s: &str) -> Result<Activation, String> {
    s.parse().map_err(|e: finn_core::Error| e.to_string())
}
