use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Invertible flow model for molecular graphs: train, sample, evaluate and
/// explore the latent space.
#[derive(Parser, Debug)]
#[command(name = "gnvp", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model and write its checkpoint and per-epoch metrics.
    Train(TrainArgs),
    /// Sample molecules from a checkpoint into a SMILES-lite file.
    Generate(GenerateArgs),
    /// Sample, then report validity, novelty, uniqueness and reconstruction.
    Eval(EvalArgs),
    /// Write noise-free latent vectors of a dataset as CSV.
    Encode(EncodeArgs),
    /// Decode a 2-D grid of latent points around one molecule.
    Grid(GridArgs),
    /// Walk along a fitted property direction from one molecule.
    Optimize(OptimizeArgs),
    /// Average metrics over five seeds at each of several temperatures.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// SMILES-lite file, or the name of a bundled corpus (qm9lite, zinclite)
    /// [default: bundled corpus of the spec]
    #[arg(long)]
    pub dataset: Option<String>,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Random seed [default: 0]
    #[arg(long, env = "GNVP_SEED")]
    pub seed: Option<u64>,
    /// key = value file; command-line flags take precedence [default: none]
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads for decoding
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Graph specification: qm9lite or zinclite
    #[arg(long, default_value = "qm9lite")]
    pub spec: String,
    /// Checkpoint to write [default: <out>/model.gnvp]
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Number of epochs [default: 200]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Minibatch size [default: 256 for qm9lite, 128 for zinclite]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Continue from a checkpoint written by an earlier `train` [default: none]
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Trained checkpoint
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Must match the checkpoint when given [default: taken from the checkpoint]
    #[arg(long)]
    pub spec: Option<String>,
    /// Number of latent samples [default: 1000]
    #[arg(long)]
    pub samples: Option<usize>,
    /// Sampling temperature [default: 0.85 for qm9lite, 0.75 for zinclite]
    #[arg(long, allow_negative_numbers = true)]
    pub temp: Option<f64>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sample: SampleArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sample: SampleArgs,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Trained checkpoint
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Must match the checkpoint when given [default: taken from the checkpoint]
    #[arg(long)]
    pub spec: Option<String>,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: Common,
    /// Trained checkpoint
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Must match the checkpoint when given [default: taken from the checkpoint]
    #[arg(long)]
    pub spec: Option<String>,
    /// Centre molecule as SMILES-lite [default: dataset entry --index]
    #[arg(long)]
    pub smiles: Option<String>,
    /// Dataset entry used as the centre when --smiles is absent [default: 0]
    #[arg(long)]
    pub index: Option<usize>,
    /// Cells per side are 2*extent+1 [default: 2]
    #[arg(long)]
    pub extent: Option<usize>,
    /// Latent distance between neighbouring cells [default: 0.5]
    #[arg(long, allow_negative_numbers = true)]
    pub step_size: Option<f64>,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Trained checkpoint
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Must match the checkpoint when given [default: taken from the checkpoint]
    #[arg(long)]
    pub spec: Option<String>,
    /// heavy_atom_count, ring_count, hetero_fraction or logp_proxy [default: logp_proxy]
    #[arg(long)]
    pub property: Option<String>,
    /// Number of steps after the start point [default: 10]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Latent distance per step [default: 0.5]
    #[arg(long, allow_negative_numbers = true)]
    pub step_size: Option<f64>,
    /// Start molecule as SMILES-lite [default: dataset entry --index]
    #[arg(long)]
    pub smiles: Option<String>,
    /// Dataset entry used as the start when --smiles is absent [default: 0]
    #[arg(long)]
    pub index: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Trained checkpoint
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Must match the checkpoint when given [default: taken from the checkpoint]
    #[arg(long)]
    pub spec: Option<String>,
    /// Latent samples per run [default: 1000]
    #[arg(long)]
    pub samples: Option<usize>,
    /// Comma-separated temperatures [default: 0.2,0.4,0.6,0.8,1.0]
    #[arg(long, value_delimiter = ',')]
    pub temps: Option<Vec<f64>>,
}
