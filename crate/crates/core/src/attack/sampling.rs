use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffnum::Tensor;
use crate::error::{Error, Result};
use crate::losses::TripleLossConfig;
use crate::rng::stream;
use crate::scalar::Real;
use crate::tracker::{extract_search_region, TrackerModel};

use super::objective::{adversarial_objective, AttackTarget};

/// Selected positions (into the video list) in selection order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub selected: Vec<usize>,
    /// Per-video saliency, in input order; empty for random sampling.
    pub saliencies: Vec<f64>,
}

/// `⌈r·n⌉` for `r` in `(0, 1]`.
pub fn sample_count(n: usize, rate: f64) -> Result<usize> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidArgument(format!("sampling rate must lie in (0, 1], got {rate}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("cannot sample from an empty video set".into()));
    }
    Ok(((rate * n as f64).ceil() as usize).clamp(1, n))
}

/// Mean `|∂L/∂x₁|` at `δ = 0`, where `x₁` is frame 2 cropped at the frame-1 box.
pub fn gradient_saliency<T: Real>(
    model: &TrackerModel<T>,
    target: &AttackTarget<T>,
    cfg: &TripleLossConfig,
) -> Result<f64> {
    let video = target.video;
    let search = extract_search_region::<T>(&video.frames[1], &video.gt[0])?;
    let zero = Tensor::zeros(search.pixels.shape());
    let obj = adversarial_objective(model, &target.template_feat, &search.pixels, &zero, cfg)?;
    let g = obj.grad.data();
    Ok(g.iter().map(|v| v.abs().as_f64()).sum::<f64>() / g.len() as f64)
}

/// Positions sorted by descending saliency (ties to the lower position), truncated to `⌈r·n⌉`.
pub fn rank_by_saliency(saliencies: &[f64], rate: f64) -> Result<Vec<usize>> {
    let take = sample_count(saliencies.len(), rate)?;
    let mut order: Vec<usize> = (0..saliencies.len()).collect();
    order.sort_by(|&a, &b| saliencies[b].total_cmp(&saliencies[a]));
    order.truncate(take);
    Ok(order)
}

pub fn greedy_sample<T: Real>(
    model: &TrackerModel<T>,
    targets: &[AttackTarget<T>],
    rate: f64,
    cfg: &TripleLossConfig,
) -> Result<Sampling> {
    sample_count(targets.len(), rate)?;
    let saliencies = targets.par_iter().map(|t| gradient_saliency(model, t, cfg)).collect::<Result<Vec<_>>>()?;
    Ok(Sampling { selected: rank_by_saliency(&saliencies, rate)?, saliencies })
}

/// Uniform sampling without replacement: a prefix of one seeded permutation,
/// so a smaller rate always selects a subset of a larger one.
pub fn random_sample(n: usize, rate: f64, seed: u64) -> Result<Sampling> {
    let take = sample_count(n, rate)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, "attack/random-sample", 0));
    order.truncate(take);
    Ok(Sampling { selected: order, saliencies: Vec::new() })
}
