//! Command-line surface.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use harmonic_extract::graph::SigmaSpec;
use harmonic_extract::pipeline::{KernelChoice, PipelineConfig, SeedMode, SolverKind};
use harmonic_extract::seeds::{RuleSet, SeedStrategy};

use crate::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "harmonic-extract",
    version,
    about = "Boilerplate removal by harmonic label propagation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label the text blocks of HTML snapshots and write prediction JSON.
    Extract(ExtractArgs),
    /// Compare predictions with ground truth and report precision/recall.
    Evaluate(EvaluateArgs),
    /// Download a page snapshot (plain GET, no scripts run).
    Fetch(FetchArgs),
    /// Serve snapshots with the tagging script and collect ground truth.
    TagServe(ServeArgs),
    /// Write the synthetic evaluation corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Inner,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Iterative,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SeedModeArg {
    Heuristic,
    Truth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    First,
    Random,
}

/// `--sigma median` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaArg(pub SigmaSpec);

impl FromStr for SigmaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("median") {
            return Ok(SigmaArg(SigmaSpec::Median));
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(SigmaArg(SigmaSpec::Fixed(v))),
            _ => Err(format!("expected `median` or a positive number, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    /// HTML files or directories of them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// GloVe-format word vectors.
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, value_enum, default_value = "rbf")]
    pub kernel: KernelArg,
    #[arg(long, default_value = "median")]
    pub sigma: SigmaArg,
    #[arg(long)]
    pub knn: Option<usize>,
    #[arg(long, value_enum, default_value = "iterative")]
    pub solver: SolverArg,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value = "heuristic")]
    pub seed_mode: SeedModeArg,
    #[arg(long, default_value_t = 0.2)]
    pub seed_fraction: f64,
    #[arg(long, value_enum, default_value = "first")]
    pub seed_strategy: StrategyArg,
    #[arg(long, default_value_t = 0)]
    pub seed_rng: u64,
    /// JSON rule file replacing the default heuristic rules.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Ground-truth directory for truth seeding (or heuristic fallback).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Keep processing remaining pages after a failure.
    #[arg(long)]
    pub continue_on_error: bool,
}

impl ExtractArgs {
    pub fn pipeline_config(&self) -> CliResult<PipelineConfig> {
        let rules = match &self.rules {
            Some(p) => RuleSet::load(p).map_err(|e| CliError::usage(e.to_string()))?,
            None => RuleSet::defaults(),
        };
        let cfg = PipelineConfig {
            kernel: match self.kernel {
                KernelArg::Inner => KernelChoice::Inner,
                KernelArg::Rbf => KernelChoice::Rbf,
            },
            sigma: self.sigma.0,
            knn: self.knn,
            solver: match self.solver {
                SolverArg::Iterative => SolverKind::Iterative,
                SolverArg::Direct => SolverKind::Direct,
            },
            tol: self.tol,
            max_iters: self.max_iters,
            threshold: self.threshold,
            seed_mode: match self.seed_mode {
                SeedModeArg::Heuristic => SeedMode::Heuristic,
                SeedModeArg::Truth => SeedMode::Truth,
            },
            seed_fraction: self.seed_fraction,
            seed_strategy: match self.seed_strategy {
                StrategyArg::First => SeedStrategy::First,
                StrategyArg::Random => SeedStrategy::Random {
                    seed: self.seed_rng,
                },
            },
            rules,
            embeddings: Some(self.embeddings.display().to_string()),
        };
        cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Directory of prediction JSON files.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth JSON files.
    #[arg(long)]
    pub truth: PathBuf,
    /// Count seeded blocks as predictions.
    #[arg(long)]
    pub include_seeds: bool,
    /// Pool counts across pages instead of averaging per page.
    #[arg(long)]
    pub micro: bool,
    /// Report JSON path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FetchArgs {
    pub url: String,
    /// Snapshot directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Page id (file stem); derived from the URL when absent.
    #[arg(long)]
    pub id: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Directory of `<id>.html` snapshots.
    pub pages: PathBuf,
    /// Where posted ground truth is written.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
    /// Tagging script served at /ui/tagger.js.
    #[arg(long)]
    pub ui: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub pages: usize,
    #[arg(long, default_value_t = crate::synth::DEFAULT_SEED)]
    pub seed: u64,
}
