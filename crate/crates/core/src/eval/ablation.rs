//! Sampling-strategy and loss-component ablation grids, averaged over
//! repeated attack seeds.

use serde::{Deserialize, Serialize};

use crate::attack::{run_eusa, AttackConfig, SamplingStrategy};
use crate::corpus::VideoSequence;
use crate::error::{Error, Result};
use crate::losses::LossTerms;
use crate::rng::derive_seed;
use crate::scalar::Real;
use crate::tracker::TrackerModel;

use super::report::{evaluate, OtbSummary, Summary, VotSummary, BOTH_POLICIES};

pub const ABLATION_RATES: [f64; 4] = [0.1, 0.3, 0.5, 1.0];
pub const ABLATION_STRATEGIES: [SamplingStrategy; 2] = [SamplingStrategy::Greedy, SamplingStrategy::Random];

/// Per-repeat attack seeds derived from one base seed.
pub fn repeat_seeds(base: u64, repeats: usize) -> Vec<u64> {
    (0..repeats as u64).map(|i| derive_seed(base, "ablate/repeat", i)).collect()
}

/// Seed-averaged headline metrics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanSummary {
    pub precision: f64,
    pub success_auc: f64,
    pub accuracy: f64,
    pub robustness: f64,
    pub eao: f64,
    pub failures: f64,
}

impl MeanSummary {
    /// Means over summaries carrying both OTB and VOT metrics.
    pub fn of(runs: &[Summary]) -> Result<Self> {
        let pairs = runs
            .iter()
            .map(|s| s.otb.zip(s.vot))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::InvalidArgument("averaging needs both otb and vot metrics".into()))?;
        let n = pairs.len() as f64;
        let mean = |f: &dyn Fn(&(OtbSummary, VotSummary)) -> f64| pairs.iter().map(f).sum::<f64>() / n;
        Ok(MeanSummary {
            precision: mean(&|p| p.0.precision),
            success_auc: mean(&|p| p.0.success_auc),
            accuracy: mean(&|p| p.1.accuracy),
            robustness: mean(&|p| p.1.robustness),
            eao: mean(&|p| p.1.eao),
            failures: mean(&|p| p.1.failures as f64),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub strategy: SamplingStrategy,
    pub sampling_rate: f64,
    /// Loss components as `f,c,d` letters.
    pub loss: String,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<Summary>,
    /// Chosen-candidate loss per seed.
    pub attack_losses: Vec<f64>,
    pub mean: MeanSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub base: AttackConfig,
    pub seeds: Vec<u64>,
    pub clean: Summary,
    /// Greedy and random sampling at each rate.
    pub sampling: Vec<AblationRow>,
    /// The seven loss-component subsets.
    pub loss: Vec<AblationRow>,
}

/// Attacks `attack_videos` once per seed with `cfg` and evaluates the
/// perturbation on `eval_videos`.
pub fn ablation_row<T: Real>(
    model: &TrackerModel<T>,
    attack_videos: &[&VideoSequence],
    eval_videos: &[&VideoSequence],
    cfg: &AttackConfig,
    seeds: &[u64],
) -> Result<AblationRow> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("ablation needs at least one seed".into()));
    }
    let mut per_seed = Vec::with_capacity(seeds.len());
    let mut attack_losses = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let cfg = AttackConfig { seed, ..cfg.clone() };
        let (delta, report) = run_eusa(model, attack_videos, &cfg)?;
        per_seed.push(evaluate(model, eval_videos, Some(&delta), &BOTH_POLICIES)?.aggregate);
        attack_losses.push(report.chosen_loss);
    }
    Ok(AblationRow {
        strategy: cfg.strategy,
        sampling_rate: cfg.sampling_rate,
        loss: cfg.loss.terms.label(),
        seeds: seeds.to_vec(),
        mean: MeanSummary::of(&per_seed)?,
        per_seed,
        attack_losses,
    })
}

pub fn sampling_grid<T: Real>(
    model: &TrackerModel<T>,
    attack_videos: &[&VideoSequence],
    eval_videos: &[&VideoSequence],
    base: &AttackConfig,
    rates: &[f64],
    seeds: &[u64],
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for strategy in ABLATION_STRATEGIES {
        for &sampling_rate in rates {
            let cfg = AttackConfig { strategy, sampling_rate, ..base.clone() };
            rows.push(ablation_row(model, attack_videos, eval_videos, &cfg, seeds)?);
        }
    }
    Ok(rows)
}

pub fn loss_grid<T: Real>(
    model: &TrackerModel<T>,
    attack_videos: &[&VideoSequence],
    eval_videos: &[&VideoSequence],
    base: &AttackConfig,
    subsets: &[LossTerms],
    seeds: &[u64],
) -> Result<Vec<AblationRow>> {
    subsets
        .iter()
        .map(|&terms| {
            let mut cfg = base.clone();
            cfg.loss.terms = terms;
            ablation_row(model, attack_videos, eval_videos, &cfg, seeds)
        })
        .collect()
}

/// Both grids: 2 strategies x `rates`, then the 7 loss subsets.
pub fn run_ablation<T: Real>(
    model: &TrackerModel<T>,
    attack_videos: &[&VideoSequence],
    eval_videos: &[&VideoSequence],
    base: &AttackConfig,
    rates: &[f64],
    seeds: &[u64],
) -> Result<AblationReport> {
    base.validate()?;
    Ok(AblationReport {
        base: base.clone(),
        seeds: seeds.to_vec(),
        clean: evaluate(model, eval_videos, None, &BOTH_POLICIES)?.aggregate,
        sampling: sampling_grid(model, attack_videos, eval_videos, base, rates, seeds)?,
        loss: loss_grid(model, attack_videos, eval_videos, base, &LossTerms::subsets(), seeds)?,
    })
}
