use std::path::PathBuf;

use brie_core::models::{ModelKind, XavierLaw};
use brie_core::training::LossKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "brie", version, about = "Rank user photos as personalized recommendation explanations")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Global {
    /// Root seed; module seeds are derived from it by label.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all cores). 1 runs everything sequentially.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a planted synthetic corpus.
    Synth(SynthCmd),
    /// Train a model and write its artifact.
    Train(TrainCmd),
    /// Evaluate a trained artifact or a baseline.
    Eval(EvalCmd),
    /// Train and evaluate several models under one seed.
    Benchmark(BenchmarkCmd),
    /// Re-run a command from its manifest.
    #[serde(skip)]
    Replay(ReplayCmd),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthCmd {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SpecArgs {
    #[arg(long, default_value_t = 400)]
    pub users: usize,
    #[arg(long, default_value_t = 80)]
    pub items: usize,
    #[arg(long, default_value_t = 8000)]
    pub photos: usize,
    #[arg(long, default_value_t = 8)]
    pub true_dim: usize,
    #[arg(long, default_value_t = 32)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 0.3)]
    pub style_noise: f64,
    #[arg(long, default_value_t = 0.1)]
    pub feature_noise: f64,
    #[arg(long, default_value_t = brie_core::corpus::DEFAULT_VAL_FRAC)]
    pub val_frac: f64,
    #[arg(long, default_value_t = brie_core::corpus::DEFAULT_TEST_FRAC)]
    pub test_frac: f64,
}

/// Corpus files, or `--synthetic` with the generator flags.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// Interaction TSV (user, item, photo).
    #[arg(long, requires = "features", conflicts_with = "synthetic")]
    pub triads: Option<PathBuf>,
    /// Photo features, binary or TSV.
    #[arg(long, requires = "triads")]
    pub features: Option<PathBuf>,
    /// Split TSV; when absent the corpus is partitioned with the seed.
    #[arg(long, requires = "triads")]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub synthetic: bool,
    #[command(flatten)]
    pub spec: SpecArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Latent factors [default: brie 64, mf-elvis 1024, elvis 256]
    #[arg(long)]
    pub d: Option<usize>,
    /// Embedding dropout [default: brie 0.75, others 0]
    #[arg(long)]
    pub dropout: Option<f32>,
    /// ELVis hidden widths, comma separated [default: d,d/2]
    #[arg(long, value_delimiter = ',')]
    pub mlp_hidden: Option<Vec<usize>>,
    /// ELVis hidden-layer dropout [default: 0.2]
    #[arg(long)]
    pub mlp_dropout: Option<f32>,
    #[arg(long, value_enum, default_value_t = Init::Uniform)]
    pub init: Init,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    Uniform,
    Normal,
}

impl From<Init> for XavierLaw {
    fn from(i: Init) -> Self {
        match i {
            Init::Uniform => XavierLaw::Uniform,
            Init::Normal => XavierLaw::Normal,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Bpr,
    Bce,
}

impl From<Loss> for LossKind {
    fn from(l: Loss) -> Self {
        match l {
            Loss::Bpr => LossKind::Bpr,
            Loss::Bce => LossKind::Bce,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Loss [default: bpr for brie, bce for mf-elvis and elvis]
    #[arg(long, value_enum)]
    pub loss: Option<Loss>,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 15)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1 << 14)]
    pub batch_size: usize,
    /// Stop on validation MAUC and restore the best epoch.
    #[arg(long)]
    pub early_stop: bool,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub min_delta: f64,
    /// Epoch cap under early stopping.
    #[arg(long, default_value_t = 100)]
    pub epoch_cap: usize,
    /// Modeled power draw in watts.
    #[arg(long, default_value_t = 65.0)]
    pub watts: f64,
    /// Modeled grid carbon intensity in gCO2/kWh.
    #[arg(long, default_value_t = 475.0)]
    pub grams_per_kwh: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Minimum train photos of a case's author for filtered metrics.
    #[arg(long, default_value_t = 10)]
    pub min_activity: u32,
    /// Minimum candidate pool size for Recall/NDCG.
    #[arg(long, default_value_t = 10)]
    pub min_candidates: usize,
    /// Activity thresholds for the MedPerc sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Option<Vec<u32>>,
    /// Write per-case ranks to cases.tsv.
    #[arg(long)]
    pub dump_cases: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainCmd {
    #[arg(long)]
    pub model: ModelKind,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalCmd {
    /// Baseline to evaluate, or the expected kind of `--artifact`.
    #[arg(long, required_unless_present = "artifact")]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub artifact: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BenchmarkCmd {
    #[arg(long, value_delimiter = ',', default_value = "brie,mf-elvis,cnt,rnd")]
    pub models: Vec<ModelKind>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayCmd {
    /// Manifest written by a previous run.
    pub manifest: PathBuf,
    /// Output directory [default: the manifest's]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn out_mut(&mut self) -> Option<&mut PathBuf> {
        match self {
            Command::Synth(c) => Some(&mut c.out),
            Command::Train(c) => Some(&mut c.out),
            Command::Eval(c) => Some(&mut c.out),
            Command::Benchmark(c) => Some(&mut c.out),
            Command::Replay(_) => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Benchmark(_) => "benchmark",
            Command::Replay(_) => "replay",
        }
    }
}
