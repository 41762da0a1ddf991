//! `eusa`: corpus generation, victim training, the universal shuffle attack,
//! evaluation and ablation grids from one reproducible configuration.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{PolicyChoice, SplitChoice};
use eusa::attack::SamplingStrategy;
use eusa::losses::LossTerms;

#[derive(Parser)]
#[command(name = "eusa", version, about = "Universal shuffle attack against a toy Siamese tracker")]
struct Cli {
    /// Worker threads for candidate and video parallelism (default: all cores).
    /// Results do not depend on this value.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Flags override the config file,
/// which overrides built-in defaults.
#[derive(Args, Clone, Debug, Default)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Global seed; corpus, training, attack and ablation seeds derive from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default)]
struct AttackFlags {
    /// ℓ∞ budget in pixels.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Sign-gradient step size in pixels.
    #[arg(long)]
    step: Option<f64>,
    /// Number of shuffled candidates.
    #[arg(long)]
    k: Option<usize>,
    /// Sampling rate in (0, 1].
    #[arg(long)]
    rate: Option<f64>,
    /// Frame sampling: `greedy` or `random`.
    #[arg(long)]
    strategy: Option<SamplingStrategy>,
    /// Loss components, e.g. `f,c,d` or `d`.
    #[arg(long)]
    loss: Option<LossTerms>,
    /// PGD passes over the sampled frames per candidate.
    #[arg(long)]
    epochs_per_candidate: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus into --out.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Number of videos.
        #[arg(long)]
        videos: Option<usize>,
    },
    /// Train the toy tracker on a corpus split.
    Train {
        #[command(flatten)]
        common: Common,
        /// Corpus directory.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Training epochs.
        #[arg(long)]
        epochs: Option<usize>,
        /// Corpus split to train on.
        #[arg(long, value_enum)]
        split: Option<SplitChoice>,
    },
    /// Optimise a universal perturbation on the train split.
    Attack {
        #[command(flatten)]
        common: Common,
        /// Corpus directory.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Trained model file.
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        attack: AttackFlags,
    },
    /// Evaluate a model, optionally against a perturbation.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Corpus directory.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Trained model file.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Perturbation to evaluate against; clean only if omitted.
        #[arg(long)]
        perturbation: Option<PathBuf>,
        /// Re-initialisation policy.
        #[arg(long, value_enum)]
        policy: Option<PolicyChoice>,
        /// Corpus split to evaluate.
        #[arg(long, value_enum)]
        split: Option<SplitChoice>,
    },
    /// Sampling-strategy and loss-component ablation grids.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Corpus directory.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Trained model file.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Attack repeats averaged per row.
        #[arg(long)]
        seeds: Option<usize>,
        #[command(flatten)]
        attack: AttackFlags,
    },
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Gen { .. } => "gen",
        Command::Train { .. } => "train",
        Command::Attack { .. } => "attack",
        Command::Eval { .. } => "eval",
        Command::Ablate { .. } => "ablate",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = command_name(&cli.command);
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({
                "status": "error",
                "command": name,
                "error": e.to_string(),
                "causes": e.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
            });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
