use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use qenc_core::features::BaselineKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "qenc",
    version,
    about = "Search and analyse quantum data-encoding circuits",
    args_conflicts_with_subcommands = true
)]
pub struct Cli {
    /// Replay a saved `config.json` instead of parsing a subcommand.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output directory override when replaying.
    #[arg(long, value_name = "DIR", requires = "config")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Run the tree search over encoding circuits.
    Search(SearchArgs),
    /// Train classical heads on fixed encodings or raw pixels.
    Eval(EvalArgs),
    /// Training-free diagnostics and correlation tables.
    #[command(subcommand)]
    Metrics(MetricsCommand),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
}

impl Command {
    pub fn out_dir(&self) -> Option<&PathBuf> {
        match self {
            Command::Search(a) => Some(&a.out),
            Command::Eval(a) => Some(&a.out),
            Command::Metrics(m) => m.out_dir(),
            Command::Synth(_) => None,
        }
    }

    pub fn set_out_dir(&mut self, dir: PathBuf) {
        match self {
            Command::Search(a) => a.out = dir,
            Command::Eval(a) => a.out = dir,
            Command::Metrics(m) => m.set_out_dir(dir),
            Command::Synth(_) => {}
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 5e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SearchArgs {
    /// Dataset file (`.qimg`, or `.csv` with a `.meta.json` sidecar).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub patch: usize,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    #[arg(long, env = "QENC_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Reject candidates whose mean normalized effective rank is below this.
    #[arg(long, value_name = "TAU")]
    pub erank_filter: Option<f64>,
    /// Drop rejected candidates instead of backing up a chance-level reward.
    #[arg(long)]
    pub discard_filtered: bool,
    /// Record effective rank for every candidate (fills `pairs.csv`).
    #[arg(long)]
    pub log_erank: bool,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long)]
    pub max_gates: Option<usize>,
    /// Images per class in the effective-rank sample.
    #[arg(long, default_value_t = 10)]
    pub per_class: usize,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Write `checkpoint.json` every N iterations.
    #[arg(long, value_name = "N")]
    pub checkpoint_every: Option<usize>,
    /// Continue from a checkpoint; search settings come from the checkpoint.
    #[arg(long, value_name = "FILE")]
    pub resume: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ModelSpec {
    Qccnn,
    Fc,
    Cnn,
    Baseline(BaselineKind),
}

impl FromStr for ModelSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "qccnn" => Ok(ModelSpec::Qccnn),
            "fc" => Ok(ModelSpec::Fc),
            "cnn" => Ok(ModelSpec::Cnn),
            _ => match s.strip_prefix("baseline:") {
                Some(kind) => kind.parse().map(ModelSpec::Baseline).map_err(|e| e.to_string()),
                None => Err(format!("unknown model `{s}`")),
            },
        }
    }
}

impl From<ModelSpec> for String {
    fn from(m: ModelSpec) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for ModelSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Qccnn => f.write_str("qccnn"),
            ModelSpec::Fc => f.write_str("fc"),
            ModelSpec::Cnn => f.write_str("cnn"),
            ModelSpec::Baseline(k) => write!(f, "baseline:{k}"),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Circuit file for `--model qccnn`.
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    /// qccnn, fc, cnn, baseline:angle_rx, baseline:angle_ry or baseline:higher_order.
    #[arg(long, default_value = "qccnn")]
    pub model: ModelSpec,
    /// Encoding layers for baseline models.
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    #[arg(long, default_value_t = 2)]
    pub patch: usize,
    /// Comma-separated training seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    /// Sweep the angle scale over `LO:HI:STEP` first and evaluate at the best value.
    #[arg(long, value_name = "LO:HI:STEP", num_args = 0..=1, default_missing_value = "0.5:2.0:0.1")]
    pub scale_sweep: Option<String>,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "kebab-case")]
pub enum MetricsCommand {
    /// Mean normalized effective rank over a brightness-balanced sample.
    Erank(ErankArgs),
    /// Meyer-Wallach entanglement averaged over random inputs.
    Entanglement(EntanglementArgs),
    /// Fourier coefficients of one qubit's expectation under an input sweep.
    Fourier(FourierArgs),
    /// Pearson correlation of erank vs. AUC, overall and by AUC quartile.
    Correlate(PairsArgs),
    /// Top-decile recall after dropping the lowest-erank fraction.
    RecallCurve(RecallArgs),
}

impl MetricsCommand {
    fn out_dir(&self) -> Option<&PathBuf> {
        match self {
            MetricsCommand::Erank(a) => a.out.as_ref(),
            MetricsCommand::Entanglement(a) => a.out.as_ref(),
            MetricsCommand::Fourier(a) => a.out.as_ref(),
            MetricsCommand::Correlate(a) => a.out.as_ref(),
            MetricsCommand::RecallCurve(a) => a.out.as_ref(),
        }
    }

    fn set_out_dir(&mut self, dir: PathBuf) {
        let slot = match self {
            MetricsCommand::Erank(a) => &mut a.out,
            MetricsCommand::Entanglement(a) => &mut a.out,
            MetricsCommand::Fourier(a) => &mut a.out,
            MetricsCommand::Correlate(a) => &mut a.out,
            MetricsCommand::RecallCurve(a) => &mut a.out,
        };
        *slot = Some(dir);
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ErankArgs {
    #[arg(long)]
    pub circuit: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub patch: usize,
    #[arg(long, default_value_t = 10)]
    pub per_class: usize,
    #[arg(long, env = "QENC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EntanglementArgs {
    #[arg(long)]
    pub circuit: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub samples: usize,
    #[arg(long, env = "QENC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RangeArg {
    /// `[-1, 1)`
    Data,
    /// `[-pi, pi)`
    Pi,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FourierArgs {
    #[arg(long)]
    pub circuit: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub qubit: usize,
    #[arg(long, value_enum, default_value_t = RangeArg::Data)]
    pub range: RangeArg,
    #[arg(long, default_value_t = 100)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    #[arg(long, default_value_t = 6)]
    pub coefficients: usize,
    #[arg(long, env = "QENC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PairsArgs {
    /// Pair log written by `search` (`pairs.csv`).
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RecallArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    /// Dropped fractions in percent.
    #[arg(long, value_delimiter = ',', default_value = "0,5,10,15,20,25,30,35,40,45,50")]
    pub fractions: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    /// blobs, xor_pixels or stripes.
    #[arg(long)]
    pub task: String,
    #[arg(long, default_value_t = 500)]
    pub count: usize,
    #[arg(long, default_value_t = 8)]
    pub height: usize,
    #[arg(long, default_value_t = 8)]
    pub width: usize,
    #[arg(long, env = "QENC_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output file; `.csv` also writes a `.meta.json` sidecar.
    #[arg(long)]
    pub output: PathBuf,
}
