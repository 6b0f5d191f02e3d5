mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "rmflow", version, about = "Flow-matching radio map generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON config, or a run.json from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write into an existing, non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Srm,
    Drm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantArg {
    Lite,
    Full,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

impl Toggle {
    pub fn on(self) -> bool {
        matches!(self, Toggle::On)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SweepArg {
    Cfg,
    Steps,
    Modules,
}

#[derive(Args, Debug, Clone, Default)]
pub struct TrainFlags {
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Spatial attention in the bottleneck.
    #[arg(long, value_enum)]
    pub sa: Option<Toggle>,
    #[arg(long, value_enum)]
    pub ema: Option<Toggle>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub ema_decay: Option<f64>,
    #[arg(long)]
    pub p_uncond: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SampleFlags {
    #[arg(long)]
    pub steps: Option<usize>,
    /// Guidance scale w.
    #[arg(long = "w")]
    pub guidance: Option<f64>,
    /// Sample from the EMA weights.
    #[arg(long = "sample-ema", value_enum)]
    pub sample_ema: Option<Toggle>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic train/test dataset.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long = "train")]
        n_train: Option<usize>,
        #[arg(long = "test")]
        n_test: Option<usize>,
        /// Grid side length.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Train a model on a generated dataset.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset root holding train/ and test/.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Score a checkpoint on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        sample: SampleFlags,
    },
    /// Generate maps for test scenes and report latency.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Number of scenes to sample.
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        sample: SampleFlags,
    },
    /// Guidance, step-count or module ablations.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        sweep: SweepArg,
        /// Trained model for the cfg and steps sweeps.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        sample: SampleFlags,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData { common, mode, n_train, n_test, size } => {
            commands::gen_data(&common, mode, n_train, n_test, size)
        }
        Command::Train { common, data, mode, train } => commands::train(&common, &data, mode, &train),
        Command::Eval { common, checkpoint, data, sample } => commands::eval(&common, &checkpoint, &data, &sample),
        Command::Sample { common, checkpoint, data, n, sample } => {
            commands::sample(&common, &checkpoint, &data, n, &sample)
        }
        Command::Ablate { common, sweep, checkpoint, data, train, sample } => {
            commands::ablate(&common, sweep, checkpoint.as_deref(), &data, &train, &sample)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": { "kind": e.kind(), "message": e.message() } });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
