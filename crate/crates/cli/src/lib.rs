//! Batch command-line harness around the `frwkv` forecaster.

pub mod bench;
pub mod commands;
pub mod config;
pub mod plot;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{RawConfig, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "frwkv", version, about = "Frequency-domain linear-attention forecaster")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for initialization and shuffling.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train and evaluate one model.
    Train(RunArgs),
    /// Score a saved checkpoint.
    Eval(RunArgs),
    /// Train Full, NoFr and NoLa under identical seeds and budget.
    Ablate(RunArgs),
    /// Time the encoder scan over increasing sequence lengths.
    BenchScaling(RunArgs),
    /// Render numeric CSV files as SVG line charts.
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Directory for the SVG files; defaults to each input's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut raw = RawConfig::default();
        if let Some(path) = &self.config {
            raw.merge_file(path)?;
        }
        raw.apply_overrides(&self.set)?;
        if let Some(seed) = self.seed {
            raw.set("seed", &seed.to_string())?;
        }
        if let Some(out) = &self.out {
            raw.set("out", &out.to_string_lossy())?;
        }
        RunConfig::resolve(raw)
    }
}

/// Runs one command and prints a short summary.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => {
            let cfg = a.resolve()?;
            let r = commands::cmd_train(&cfg)?;
            println!(
                "test mse {:.6} mae {:.6} ({} units, best epoch {}); artifacts in {}",
                r.test.mse,
                r.test.mae,
                r.test.units,
                r.best_epoch,
                cfg.out.display()
            );
        }
        Command::Eval(a) => {
            let cfg = a.resolve()?;
            let m = commands::cmd_eval(&cfg)?;
            println!("{} mse {:.6} mae {:.6} over {} windows ({} units)", m.split, m.mse, m.mae, m.windows, m.units);
        }
        Command::Ablate(a) => {
            let cfg = a.resolve()?;
            commands::cmd_ablate(&cfg)?;
            print!("{}", std::fs::read_to_string(cfg.out.join(commands::ABLATION_TXT))?);
        }
        Command::BenchScaling(a) => {
            let cfg = a.resolve()?;
            commands::cmd_bench_scaling(&cfg)?;
            print!("{}", std::fs::read_to_string(cfg.out.join(commands::SCALING_TXT))?);
        }
        Command::Plot { inputs, out } => {
            for p in commands::cmd_plot(&inputs, out.as_deref())? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}
