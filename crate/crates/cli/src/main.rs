//! `hembed`: train compressors, encode embeddings into Hamming codes, and
//! evaluate retrieval, similarity and classification on the codes.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "hembed",
    version,
    about = "Binary Hamming embeddings: train, encode, search, evaluate"
)]
pub struct Cli {
    /// Seed for every random choice a command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Machine-readable `key=value` output.
    #[arg(long, global = true)]
    pub porcelain: bool,
    /// Suppress progress output on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a compressor on an embedding file.
    Train(TrainArgs),
    /// Encode embeddings into codes with a trained model (zero noise).
    Encode(EncodeArgs),
    /// Median-threshold baseline codes (one bit per dimension).
    Baseline(BaselineArgs),
    /// Rank indexed codes by Hamming distance to a query.
    Search(SearchArgs),
    /// Spearman correlation between ground-truth and computed pair similarities.
    EvalSim(EvalSimArgs),
    /// Rank-weighted k-NN classification error of labeled codes.
    EvalKnn(EvalKnnArgs),
    /// Average absolute correlation between dimensions (or bits).
    Correlation(CorrelationArgs),
    /// Storage of n float embeddings versus n binary codes.
    Memreport(MemreportArgs),
    /// Render codes as a plain PBM image, one row per code.
    ExportBitmap(ExportBitmapArgs),
    /// Write synthetic fixtures.
    GenSynthetic(GenSyntheticArgs),
    /// Convert a CSV file (one embedding per line) to the binary embedding format.
    ImportCsv(ImportCsvArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Embedding file (`.csv` is read as CSV).
    #[arg(long, short)]
    pub input: PathBuf,
    /// Code length in bits; 128, 256 and 512 are the usual choices.
    #[arg(long, short, value_parser = clap::value_parser!(u32).range(1..))]
    pub bits: u32,
    /// Output model file.
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_epochs: usize,
    /// Epochs in the trailing window checked by the stopping rule.
    #[arg(long, default_value_t = 100)]
    pub patience: usize,
    /// Stop when the windowed loss range falls below this.
    #[arg(long, default_value_t = 1e-5)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Anneal τ linearly to this value over the first half of training.
    #[arg(long)]
    pub tau_final: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long, short)]
    pub model: PathBuf,
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Also report the mean reconstruction loss over the input.
    #[arg(long)]
    pub report_loss: bool,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Threshold sidecar; defaults to `<out>.thresholds`.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("query").required(true).args(["query_id", "query_hex", "query_bits"])))]
pub struct SearchArgs {
    #[arg(long, short)]
    pub codes: PathBuf,
    /// Id of an indexed record to use as the query.
    #[arg(long)]
    pub query_id: Option<String>,
    /// Query as hex of its little-endian bytes.
    #[arg(long)]
    pub query_hex: Option<String>,
    /// Query as a 0/1 string, bit 0 first.
    #[arg(long)]
    pub query_bits: Option<String>,
    #[arg(short, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Cosine,
    Hamming,
}

#[derive(Debug, Args)]
pub struct EvalSimArgs {
    /// Embedding or code file.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Tab-separated `id_a id_b score` lines.
    #[arg(long, short)]
    pub pairs: PathBuf,
    #[arg(long, value_enum)]
    pub metric: Metric,
}

#[derive(Debug, Args)]
pub struct EvalKnnArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(short, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
}

#[derive(Debug, Args)]
pub struct CorrelationArgs {
    /// Embedding or code file.
    #[arg(long, short)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct MemreportArgs {
    #[arg(value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: u64,
    #[arg(value_parser = clap::value_parser!(u64).range(1..))]
    pub bits: u64,
}

#[derive(Debug, Args)]
pub struct ExportBitmapArgs {
    #[arg(long, short)]
    pub codes: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Keep only codes with this label.
    #[arg(long)]
    pub label: Option<String>,
    /// Randomly sample this many codes (seeded).
    #[arg(long)]
    pub sample: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenSyntheticArgs {
    #[command(subcommand)]
    pub kind: SyntheticKind,
}

#[derive(Debug, Subcommand)]
pub enum SyntheticKind {
    /// Embeddings generated exactly from a random codebook and random codes.
    Planted {
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 8)]
        bits: usize,
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Independent factors, each duplicated into several noisy dimensions.
    Factors {
        #[arg(long, default_value_t = 8)]
        factors: usize,
        #[arg(long, default_value_t = 8)]
        copies: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Independent standard normal dimensions.
    Gaussian {
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Labeled codes around two centers `bits/2` apart, with bit-flip noise.
    Clusters {
        #[arg(long, default_value_t = 128)]
        bits: usize,
        #[arg(long, default_value_t = 1000)]
        n_train: usize,
        #[arg(long, default_value_t = 200)]
        n_test: usize,
        #[arg(long, default_value_t = 0.05)]
        flip: f64,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ImportCsvArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
