//! Command-line front end: `train`, `predict`, `synth`, `bench` and `confidence`.
//!
//! Every subcommand accepts `--config FILE` holding `key=value` lines whose keys are
//! the long flag names; flags given on the command line win over the file.

mod commands;
mod config;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use gbmo::{BoostMode, LabelSpec, LossKind, Metric, SynthKind};

pub use commands::{bench, BenchRow};
pub use config::expand_config_files;

/// Process exit codes.
pub mod exit {
    pub const USAGE: i32 = 1;
    pub const DATA: i32 = 2;
    pub const NUMERIC: i32 = 3;
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: exit::USAGE, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<gbmo::Error> for CliError {
    fn from(e: gbmo::Error) -> Self {
        use gbmo::Error::*;
        let code = match &e {
            Config(_) => exit::USAGE,
            Ingestion { .. } | Data(_) | Shape(_) | Model { .. } | Io { .. } => exit::DATA,
            Numeric(_) | Internal(_) => exit::NUMERIC,
        };
        Self { code, message: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "gbmo", version, about = "Multi-output gradient-boosted trees", args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an ensemble and write the model and its training history.
    Train(TrainArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Generate a synthetic dataset as CSV.
    Synth(SynthArgs),
    /// Time boosting rounds per mode.
    Bench(BenchArgs),
    /// Confidence that method A beats method B over paired trials.
    Confidence(ConfidenceArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct Hyper {
    /// `mse` or `softmax` (default mse).
    #[arg(long)]
    pub loss: Option<LossKind>,
    /// Eval metric: `rmse` or `accuracy` (default follows the loss).
    #[arg(long)]
    pub metric: Option<Metric>,
    /// mo_dense, mo_sparse, mo_restricted, mo_exact or so_baseline.
    #[arg(long)]
    pub mode: Option<BoostMode>,
    /// Learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// L2 penalty on leaf weights.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Maximum tree depth.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Leaves per tree (default: three quarters of 2^depth).
    #[arg(long)]
    pub max_leaves: Option<usize>,
    /// Minimum samples on each side of a split.
    #[arg(long)]
    pub min_samples: Option<usize>,
    /// Splits need a gain above this.
    #[arg(long, allow_hyphen_values = true)]
    pub gain_threshold: Option<f64>,
    /// Maximum bins per feature.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Columns kept per leaf in mo_sparse and mo_restricted.
    #[arg(long)]
    pub topk: Option<usize>,
    /// Maximum boosting rounds (for `bench`: timed rounds after one warm-up, default 10).
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Early-stopping patience in rounds; 0 disables early stopping.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Accepted for compatibility; training draws no random numbers.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all available cores).
    #[arg(long)]
    pub workers: Option<usize>,
}

impl Hyper {
    pub fn to_config(&self) -> CliResult<gbmo::BoosterConfig64> {
        let mut c = gbmo::BoosterConfig64::default();
        if let Some(v) = self.loss {
            c.loss = v;
        }
        c.metric = self.metric;
        if let Some(v) = self.mode {
            c.mode = v;
        }
        if let Some(v) = self.lr {
            c.learning_rate = v;
        }
        if let Some(v) = self.lambda {
            c.lambda = v;
        }
        if let Some(v) = self.depth {
            c.max_depth = v;
        }
        c.max_leaves = self.max_leaves;
        if let Some(v) = self.min_samples {
            c.min_samples = v;
        }
        if let Some(v) = self.gain_threshold {
            c.gain_threshold = v;
        }
        if let Some(v) = self.bins {
            c.max_bins = v;
        }
        c.sparse_k = self.topk;
        if let Some(v) = self.rounds {
            c.max_rounds = v;
        }
        if let Some(p) = self.patience {
            c.early_stop_patience = (p > 0).then_some(p);
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c.workers = self.workers;
        if c.mode.is_sparse() && c.sparse_k.is_none() {
            return Err(CliError::usage(format!("--mode {} requires --topk", c.mode)));
        }
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training data: CSV, or a binary cache.
    #[arg(long)]
    pub data: PathBuf,
    /// Target columns: `N` trailing columns, or `class:C` for a trailing class index.
    #[arg(long, default_value = "1")]
    pub labels: LabelSpec,
    /// Held-out data monitored for early stopping.
    #[arg(long)]
    pub eval_data: Option<PathBuf>,
    /// Output model path.
    #[arg(long)]
    pub model: PathBuf,
    /// History CSV (default: the model path with `.history.csv` appended).
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// File of `key=value` defaults for the other flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: Hyper,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Label columns present in the data, dropped before predicting.
    #[arg(long)]
    pub labels: Option<LabelSpec>,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Emit class probabilities instead of logits for softmax models.
    #[arg(long)]
    pub probabilities: bool,
    #[arg(long)]
    pub workers: Option<usize>,
    /// File of `key=value` defaults for the other flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub kind: SynthKind,
    #[arg(long, short = 'n')]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// File of `key=value` defaults for the other flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "1")]
    pub labels: LabelSpec,
    /// Comma-separated modes to time.
    #[arg(long, value_delimiter = ',', default_value = "mo_dense")]
    pub modes: Vec<BoostMode>,
    /// Comma-separated target replication factors; more than one also reports ratios.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub replicate: Vec<usize>,
    /// File of `key=value` defaults for the other flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: Hyper,
}

#[derive(Debug, Args)]
pub struct ConfidenceArgs {
    /// Per-trial results of method A: comma-separated numbers or a file of them.
    #[arg(long, allow_hyphen_values = true)]
    pub a: String,
    /// Per-trial results of method B, in the same trial order.
    #[arg(long, allow_hyphen_values = true)]
    pub b: String,
    /// `greater`: confidence that A - B > 0. `less`: that A - B < 0.
    #[arg(long, default_value = "greater")]
    pub direction: gbmo::Direction,
    /// File of `key=value` defaults for the other flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command. Data goes to `stdout`,
/// diagnostics to `stderr`. Returns the process exit code.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config_files(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return e.code;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => exit::USAGE,
            };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    match commands::dispatch(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.code
        }
    }
}
