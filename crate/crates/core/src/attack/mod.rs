//! Universal perturbation search: video sampling, `k` shuffled candidates
//! optimised by sign-gradient ascent, and selection of the highest-loss one.

mod objective;
mod run;
mod sampling;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::TripleLossConfig;

pub use objective::{adversarial_objective, pgd_step, AttackTarget, Objective, TermValues};
pub use run::{optimize_candidate, run_eusa, AttackReport, CandidateState, CandidateSummary, StepRecord};
pub use sampling::{gradient_saliency, greedy_sample, random_sample, rank_by_saliency, sample_count, Sampling};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingStrategy {
    Greedy,
    Random,
}

impl std::str::FromStr for SamplingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(SamplingStrategy::Greedy),
            "random" => Ok(SamplingStrategy::Random),
            other => Err(Error::InvalidArgument(format!("unknown strategy {other:?}, expected greedy or random"))),
        }
    }
}

impl std::fmt::Display for SamplingStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SamplingStrategy::Greedy => "greedy",
            SamplingStrategy::Random => "random",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    /// ℓ∞ budget in pixel units.
    pub epsilon: f64,
    /// Sign-gradient step in pixel units.
    pub step: f64,
    /// Number of shuffled candidates `k`.
    pub candidates: usize,
    /// Fraction `r` of the videos used for optimisation.
    pub sampling_rate: f64,
    pub epochs_per_candidate: usize,
    pub strategy: SamplingStrategy,
    pub seed: u64,
    pub loss: TripleLossConfig,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            epsilon: 16.0,
            step: 0.9,
            candidates: 50,
            sampling_rate: 0.5,
            epochs_per_candidate: 1,
            strategy: SamplingStrategy::Greedy,
            seed: 0,
            loss: TripleLossConfig::default(),
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.step > 0.0 && self.step <= self.epsilon) {
            return bad(format!(
                "step must satisfy 0 < step <= epsilon, got step {} epsilon {}",
                self.step, self.epsilon
            ));
        }
        if !(self.sampling_rate > 0.0 && self.sampling_rate <= 1.0) {
            return bad(format!("sampling rate must lie in (0, 1], got {}", self.sampling_rate));
        }
        if self.candidates == 0 {
            return bad("at least one candidate is required".into());
        }
        if self.epochs_per_candidate == 0 {
            return bad("epochs_per_candidate must be at least 1".into());
        }
        self.loss.validate()
    }
}
