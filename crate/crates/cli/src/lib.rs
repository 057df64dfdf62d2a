//! Staged command-line pipeline over the `typofill` crate.
//!
//! Each subcommand reads its inputs and the artifacts of earlier stages from
//! disk, writes its own artifacts to the output directory and records a
//! `manifest.json` entry with the configuration and file checksums.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod synth;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use synth::{Scenario, SynthParams};

#[derive(Debug, Parser)]
#[command(name = "typofill", version, about = "Impute missing typological features")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Flat `key = value` config file.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// Input directory.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and check every input, report counts.
    Validate,
    /// Train the feature-presence classifier.
    Presence,
    /// Rank present cells by predicted missingness.
    Rank,
    /// k-fold evaluation of the KNN baseline and the per-feature models.
    EvalKfold,
    /// Evaluation on the cells ranked most likely missing.
    EvalMissing,
    /// Train every per-feature model and write the completed matrix.
    Impute,
    /// Estimate POS-tagger quality and select corpus languages.
    PosQuality,
    /// Summarize the evaluation tables.
    Report,
    /// Write a synthetic input set into the data directory.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "fam_determined")]
    pub scenario: Scenario,
    #[arg(long, default_value_t = 60)]
    pub langs: usize,
    #[arg(long, default_value_t = 12)]
    pub feats: usize,
    /// Fraction of observed cells.
    #[arg(long)]
    pub observed: Option<f64>,
    /// Probability of a 1 among unplanted values.
    #[arg(long)]
    pub base_rate: Option<f64>,
    #[arg(long)]
    pub families: Option<usize>,
    /// Sentences per language corpus.
    #[arg(long)]
    pub sentences: Option<usize>,
}

impl Cli {
    /// Defaults, then the config file, then `--set`, then dedicated flags.
    pub fn run_config(&self) -> Result<RunConfig> {
        let g = &self.global;
        let mut cfg = RunConfig::default();
        if let Some(path) = &g.config {
            cfg.apply_file(path)?;
        }
        for pair in &g.set {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got `{pair}`"))?;
            cfg.set(k.trim(), v).with_context(|| format!("--set {pair}"))?;
        }
        if let Some(d) = &g.data {
            cfg.inputs.data_dir = d.clone();
        }
        if let Some(o) = &g.out {
            cfg.out_dir = o.clone();
        }
        if let Some(s) = g.seed {
            cfg.seed = s;
        }
        if g.threads.is_some() {
            cfg.threads = g.threads;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn synth_params(a: &SynthArgs, seed: u64) -> SynthParams {
    let mut p = SynthParams::new(a.scenario, a.langs, a.feats, seed);
    if let Some(x) = a.observed {
        p.observed = x;
    }
    if let Some(x) = a.base_rate {
        p.base_rate = x;
    }
    if let Some(x) = a.families {
        p.n_families = x;
    }
    if let Some(x) = a.sentences {
        p.sentences = x;
    }
    p
}

/// Runs one parsed invocation inside a pool of the configured size.
pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = cli.run_config()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .context("building the worker pool")?;
    pool.install(|| match &cli.command {
        Command::Validate => commands::validate(&cfg),
        Command::Presence => commands::presence(&cfg),
        Command::Rank => commands::rank(&cfg),
        Command::EvalKfold => commands::eval_kfold(&cfg),
        Command::EvalMissing => commands::eval_missing(&cfg),
        Command::Impute => commands::impute(&cfg),
        Command::PosQuality => commands::pos_quality(&cfg),
        Command::Report => commands::report(&cfg),
        Command::Synth(a) => commands::synth(&cfg, &synth_params(a, cfg.seed), &cfg.inputs.data_dir),
    })
}

/// Parses `args` (program name first) and runs them.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    execute(&Cli::try_parse_from(args)?)
}
