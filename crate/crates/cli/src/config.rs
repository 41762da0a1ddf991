//! The single JSON run configuration and its seed-derivation rule.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use eusa::attack::AttackConfig;
use eusa::corpus::CorpusConfig;
use eusa::eval::{repeat_seeds, ABLATION_RATES};
use eusa::rng::derive_seed;
use eusa::tracker::{ReinitPolicy, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PolicyChoice {
    Otb,
    Vot,
    Both,
}

impl PolicyChoice {
    pub fn policies(self) -> Vec<ReinitPolicy> {
        match self {
            PolicyChoice::Otb => vec![ReinitPolicy::Otb],
            PolicyChoice::Vot => vec![ReinitPolicy::Vot],
            PolicyChoice::Both => vec![ReinitPolicy::Otb, ReinitPolicy::Vot],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitChoice {
    Train,
    Holdout,
    All,
}

/// Videos the `train` command fits on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub split: SplitChoice,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings { split: SplitChoice::Train }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub policy: PolicyChoice,
    /// Videos evaluated by `eval` and `ablate`.
    pub split: SplitChoice,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings { policy: PolicyChoice::Both, split: SplitChoice::Holdout }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSettings {
    /// Attack repeats averaged per grid row.
    pub repeats: usize,
    pub rates: Vec<f64>,
}

impl Default for AblationSettings {
    fn default() -> Self {
        AblationSettings { repeats: 5, rates: ABLATION_RATES.to_vec() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub perturbation: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Every setting of every subcommand. Module seeds are not free parameters:
/// they are derived from `seed` by [`RunConfig::resolve`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub corpus: CorpusConfig,
    pub train: TrainConfig,
    pub training: TrainSettings,
    pub attack: AttackConfig,
    pub eval: EvalSettings,
    pub ablation: AblationSettings,
    pub paths: Paths,
}

/// `(section, label)` pairs: `section.seed = derive_seed(seed, label, 0)`.
const DERIVED_SEEDS: [(&str, &str); 3] = [("corpus", "corpus"), ("train", "train"), ("attack", "attack")];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let raw: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let cfg: RunConfig =
            serde_json::from_value(raw.clone()).with_context(|| format!("invalid config {}", path.display()))?;
        for (section, label) in DERIVED_SEEDS {
            if let Some(given) = raw.get(section).and_then(|s| s.get("seed")) {
                let derived = derive_seed(cfg.seed, label, 0);
                if given.as_u64() != Some(derived) {
                    bail!(
                        "{section}.seed is derived from the global seed ({derived} for seed {}); set `seed` instead",
                        cfg.seed
                    );
                }
            }
        }
        Ok(cfg)
    }

    /// Fills the module seeds from the global seed.
    pub fn resolve(mut self) -> Self {
        self.corpus.seed = derive_seed(self.seed, "corpus", 0);
        self.train.seed = derive_seed(self.seed, "train", 0);
        self.attack.seed = derive_seed(self.seed, "attack", 0);
        self
    }

    /// Seed of the untrained model's initial weights.
    pub fn init_seed(&self) -> u64 {
        derive_seed(self.seed, "train/init", 0)
    }

    pub fn ablation_seeds(&self) -> Vec<u64> {
        repeat_seeds(derive_seed(self.seed, "ablate", 0), self.ablation.repeats)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is plain data")
    }
}
