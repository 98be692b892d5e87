//! Config-driven runner for training, evaluating and inspecting attention
//! LSTMs. See [`config::RunConfig`] for the file format.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "attn-lstm", version, about = "Attention LSTMs for activity recognition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output path; its meaning depends on the command.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the training and synthetic-data seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train, then write checkpoint, history and test report under the output dir (or `--out`).
    Train(CommonArgs),
    /// Evaluate the checkpoint on the test split; `--out` is the report path.
    Eval(CommonArgs),
    /// Export attention traces of the first test windows; `--out` is the trace path.
    ExportAttention {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of windows.
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Write the synthetic dataset as CSVs; `--out` is the directory.
    GenSynthetic(CommonArgs),
}

fn load(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.override_seed(seed);
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => {
            let mut cfg = load(&args)?;
            if let Some(dir) = args.out {
                cfg.output.dir = dir;
            }
            let report = commands::cmd_train(&cfg)?;
            println!("mean_f1={:?}", report.mean_f1);
        }
        Command::Eval(args) => {
            let cfg = load(&args)?;
            let report = commands::cmd_eval(&cfg, args.out.as_deref())?;
            println!("mean_f1={:?}", report.mean_f1);
        }
        Command::ExportAttention { common, n } => {
            let cfg = load(&common)?;
            let path = commands::cmd_export_attention(&cfg, n, common.out.as_deref())?;
            println!("{}", path.display());
        }
        Command::GenSynthetic(args) => {
            let cfg = load(&args)?;
            let dir = commands::cmd_gen_synthetic(&cfg, args.out.as_deref())?;
            println!("{}", dir.display());
        }
    }
    Ok(())
}
