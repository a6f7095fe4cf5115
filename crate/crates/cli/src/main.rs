use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use deepmatch::model::ModelVariant;

mod commands;
mod config;
mod failure;
mod manifest;

use config::{RunConfig, CONFIG_ENV};

#[derive(Debug, Parser)]
#[command(name = "deepmatch", version, about = "Template-initialized event detection for multichannel recordings")]
pub struct Cli {
    /// TOML run configuration; unset keys keep their defaults.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Overrides the run seed (and the synthetic-data seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Restricts training and evaluation to one model variant.
    #[arg(long, global = true, value_enum)]
    variant: Option<VariantArg>,
    /// Matching tolerance in seconds.
    #[arg(long, global = true)]
    tolerance_s: Option<f64>,
    /// Build leave-one-out templates from all subjects, held-out one included.
    #[arg(long, global = true)]
    paper_faithful: bool,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Deepmf,
    Standard,
}

impl From<VariantArg> for ModelVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Deepmf => ModelVariant::DeepMf,
            VariantArg::Standard => ModelVariant::Standard,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic subjects (MCRD + events CSV + ground truth JSON).
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        subjects: usize,
    },
    /// Resample, band-pass, re-reference and select channels.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sampling rate of a CSV input without a time_s column.
        #[arg(long)]
        fs: Option<f64>,
    },
    /// Epoch, baseline-correct, reject and average one subject.
    Epoch {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grand-average subject averages into a smoothed template.
    Template {
        #[arg(long, required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an encoder-decoder on preprocessed recordings.
    Pretrain {
        #[arg(long, required = true, num_args = 1..)]
        recordings: Vec<PathBuf>,
        /// Required for the deepmf variant.
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace the decoder with a detector and train it on labelled events.
    Finetune {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        recordings: Vec<PathBuf>,
        /// One events CSV per recording, in the same order.
        #[arg(long, required = true, num_args = 1..)]
        events: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a detector over a whole preprocessed recording.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick peaks from a trace and score them against true events.
    Eval {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "subject")]
        subject: String,
    },
    /// Leave-one-subject-out evaluation.
    Loo {
        /// Directory of raw `<name>.mcrd` recordings with `<name>.events.csv`.
        #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
        data_dir: Option<PathBuf>,
        /// Generate this many subjects from the [synth] section instead.
        #[arg(long)]
        synthetic: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic and finite-difference gradients of both graphs.
    Gradcheck {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Coordinates sampled per graph of the full-size model.
        #[arg(long, default_value_t = 200)]
        coords: usize,
    },
}

impl Cli {
    /// The config file (if any) with command-line overrides applied.
    fn resolve_config(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
            cfg.synth.seed = seed;
        }
        if let Some(v) = self.variant {
            cfg.run.variants = vec![v.into()];
        }
        if let Some(t) = self.tolerance_s {
            cfg.peaks.tolerance_s = t;
        }
        if self.paper_faithful {
            cfg.run.paper_faithful = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = cli.resolve_config().and_then(|cfg| commands::run(&cli.command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = failure::classify(&err);
            eprintln!("error: {}", record.message);
            eprintln!("{}", serde_json::to_string(&record).expect("serializable"));
            ExitCode::from(record.exit_code as u8)
        }
    }
}
