//! Command-line front end for training and analysing MRnet models.
//!
//! Verbs: `train`, `eval`, `calibrate-beta`, `embed`. All of them read a
//! `key = value` configuration (see [`config`]); command-line flags override
//! individual keys and are recorded as such in run manifests.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric divergence.

pub mod commands;
pub mod config;
mod dataset;
pub mod error;


use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_calibrate, cmd_embed, cmd_eval, cmd_train, mean_std};
pub use config::{RawConfig, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "mrnet", version, about = "Manifold-regularized networks: train, evaluate, calibrate, embed")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one or more seeded runs.
    Train(Common),
    /// Clean and adversarial accuracy of checkpoints on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint to evaluate; repeat for μ ± σ over several runs.
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<PathBuf>,
        /// Comma-separated perturbation levels (0 is clean accuracy).
        #[arg(long)]
        betas: Option<String>,
    },
    /// Pairwise-distance histograms and a recommended perturbation level.
    #[command(name = "calibrate-beta")]
    CalibrateBeta {
        #[command(flatten)]
        common: Common,
        /// Also write the configuration with the recommended beta filled in.
        #[arg(long)]
        write_config: Option<PathBuf>,
    },
    /// Distance matrix, Dunn index, silhouettes and k-NN of a checkpoint's test embedding.
    Embed {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "lambda-m")]
    pub lambda_m: Option<f64>,
    /// Learning-rate schedule, e.g. "0.1 (15-3-2)".
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long, value_parser = ["mnist", "cifar10", "blobs"])]
    pub dataset: Option<String>,
    /// Keep only the first N training samples.
    #[arg(long)]
    pub subset: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
}

impl Common {
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(&self.config)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", self.config.display())))?;
        let mut raw = RawConfig::parse(&text)?;
        let flags = [
            ("train", "seed", self.seed.map(|v| v.to_string())),
            ("output", "dir", self.out.as_ref().map(|p| p.display().to_string())),
            ("train", "beta", self.beta.map(|v| v.to_string())),
            ("train", "manifold_weight", self.lambda_m.map(|v| v.to_string())),
            ("train", "schedule", self.schedule.clone()),
            ("data", "dataset", self.dataset.clone()),
            ("data", "subset", self.subset.map(|v| v.to_string())),
            ("train", "runs", self.runs.map(|v| v.to_string())),
        ];
        for (section, key, value) in flags {
            if let Some(v) = value {
                raw.set(section, key, v);
            }
        }
        RunConfig::from_raw(raw)
    }
}

/// Runs one parsed command, printing a short report to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(common) => {
            let cfg = common.load()?;
            let report = cmd_train(&cfg)?;
            for r in &report.runs {
                println!("seed {}: test accuracy {:.4} ({})", r.seed, r.test_acc, r.dir.display());
            }
            if report.runs.len() > 1 {
                print!("{}", report.aggregate());
            }
        }
        Command::Eval { common, checkpoints, betas } => {
            let mut cfg = common.load()?;
            if let Some(b) = betas {
                cfg.raw.set("eval", "betas", b);
                cfg = RunConfig::from_raw(cfg.raw)?;
            }
            print!("{}", cmd_eval(&cfg, &checkpoints)?.summary());
        }
        Command::CalibrateBeta { common, write_config } => {
            let cfg = common.load()?;
            print!("{}", cmd_calibrate(&cfg, write_config.as_deref())?.to_text());
        }
        Command::Embed { common, checkpoint } => {
            let cfg = common.load()?;
            let r = cmd_embed(&cfg, &checkpoint)?;
            println!("points {} (subsampled: {}), dunn {}, silhouette {}", r.points, r.subsampled, r.dunn, r.silhouette_mean);
        }
    }
    Ok(())
}
