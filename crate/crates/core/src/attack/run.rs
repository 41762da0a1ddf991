use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffnum::Tensor;
use crate::error::{Error, Result};
use crate::perturbation::Perturbation;
use crate::rng::stream;
use crate::scalar::Real;
use crate::tracker::{extract_search_region, TrackerModel};

use super::objective::{adversarial_objective, pgd_step, AttackTarget, TermValues};
use super::sampling::{greedy_sample, random_sample, Sampling};
use super::{AttackConfig, SamplingStrategy};

/// One sign-gradient step of a candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub video_id: usize,
    pub frame: usize,
    /// Loss at the perturbation before the step.
    pub loss: f64,
}

#[derive(Clone, Debug)]
pub struct CandidateState<T: Real = f64> {
    pub index: usize,
    /// Positions into the sampled target list.
    pub ordering: Vec<usize>,
    pub delta: Tensor<T>,
    /// Sum of the recorded step losses.
    pub loss: f64,
    pub steps: Vec<StepRecord>,
    pub last_terms: TermValues,
}

/// Optimises candidate `index` from `δ = 0` over its own shuffle of `targets`.
pub fn optimize_candidate<T: Real>(
    model: &TrackerModel<T>,
    targets: &[&AttackTarget<T>],
    index: usize,
    cfg: &AttackConfig,
) -> Result<CandidateState<T>> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("candidate ordering is empty".into()));
    }
    let mut rng = stream(cfg.seed, "attack/candidate", index as u64);
    let mut ordering: Vec<usize> = (0..targets.len()).collect();
    ordering.shuffle(&mut rng);
    let mut delta = Perturbation::<T>::zeros(cfg.epsilon).values().clone();
    let mut steps = Vec::with_capacity(targets.len() * cfg.epochs_per_candidate);
    let (mut loss, mut last_terms) = (0.0, TermValues::default());
    for _ in 0..cfg.epochs_per_candidate {
        for &pos in &ordering {
            let target = targets[pos];
            let video = target.video;
            let frame = rng.gen_range(1..video.len());
            let search = extract_search_region::<T>(&video.frames[frame], &video.gt[frame])?;
            let obj = adversarial_objective(model, &target.template_feat, &search.pixels, &delta, &cfg.loss)?;
            delta = pgd_step(&delta, &obj.grad, cfg.step, cfg.epsilon)?;
            loss += obj.loss;
            last_terms = obj.terms;
            steps.push(StepRecord { video_id: video.id, frame, loss: obj.loss });
        }
    }
    Ok(CandidateState { index, ordering, delta, loss, steps, last_terms })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub index: usize,
    /// Video ids in the order they were visited.
    pub ordering: Vec<usize>,
    pub loss: f64,
    pub steps: Vec<StepRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub config: AttackConfig,
    /// Ids of the sampled videos, in selection order.
    pub sampled_video_ids: Vec<usize>,
    /// `(video id, saliency)` for every input video under greedy sampling.
    pub saliencies: Vec<(usize, f64)>,
    pub candidate_losses: Vec<f64>,
    pub chosen_index: usize,
    pub chosen_loss: f64,
    pub linf: f64,
    pub candidates: Vec<CandidateSummary>,
}

impl AttackReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data") + "\n"
    }
}

/// Samples videos, optimises `k` candidates in parallel and returns the one
/// with the largest accumulated loss (ties to the lowest index). The result
/// does not depend on the number of worker threads.
pub fn run_eusa<T: Real>(
    model: &TrackerModel<T>,
    videos: &[&crate::corpus::VideoSequence],
    cfg: &AttackConfig,
) -> Result<(Perturbation<T>, AttackReport)> {
    cfg.validate()?;
    if videos.is_empty() {
        return Err(Error::InvalidArgument("attack needs at least one video".into()));
    }
    let targets = videos.par_iter().map(|v| AttackTarget::new(model, v)).collect::<Result<Vec<_>>>()?;
    let Sampling { selected, saliencies } = match cfg.strategy {
        SamplingStrategy::Greedy => greedy_sample(model, &targets, cfg.sampling_rate, &cfg.loss)?,
        SamplingStrategy::Random => random_sample(targets.len(), cfg.sampling_rate, cfg.seed)?,
    };
    let chosen: Vec<&AttackTarget<T>> = selected.iter().map(|&i| &targets[i]).collect();
    let states = (0..cfg.candidates)
        .into_par_iter()
        .map(|tau| optimize_candidate(model, &chosen, tau, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (i, s) in states.iter().enumerate() {
        if s.loss > states[best].loss {
            best = i;
        }
    }
    let delta = Perturbation::new(states[best].delta.clone(), cfg.epsilon)?;
    let report = AttackReport {
        config: cfg.clone(),
        sampled_video_ids: chosen.iter().map(|t| t.video.id).collect(),
        saliencies: videos.iter().map(|v| v.id).zip(saliencies).collect(),
        candidate_losses: states.iter().map(|s| s.loss).collect(),
        chosen_index: best,
        chosen_loss: states[best].loss,
        linf: delta.linf(),
        candidates: states
            .iter()
            .map(|s| CandidateSummary {
                index: s.index,
                ordering: s.ordering.iter().map(|&p| chosen[p].video.id).collect(),
                loss: s.loss,
                steps: s.steps.clone(),
            })
            .collect(),
    };
    Ok((delta, report))
}
