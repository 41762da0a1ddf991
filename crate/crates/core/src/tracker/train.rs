//! Supervised training of the toy tracker on (template, search, box) triples.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::VideoSequence;
use crate::diffnum::{Tape, Tensor};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::image::crop_square;
use crate::rng::stream;
use crate::scalar::Real;

use super::anchors::{encode, AnchorSet};
use super::model::TrackerModel;
use super::{extract_template, SEARCH_CONTEXT, SEARCH_SIZE};

pub const POSITIVE_IOU: f64 = 0.6;
pub const NEGATIVE_IOU: f64 = 0.3;
const SMOOTH_L1_BETA: f64 = 1.0 / 9.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub samples_per_epoch: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Learning rate is multiplied by `lr_decay` after every epoch.
    pub lr_decay: f64,
    /// Largest frame gap between template and search frames.
    pub max_frame_gap: usize,
    /// Search-centre jitter as a fraction of the larger box side.
    pub shift_jitter: f64,
    /// Log-uniform scale jitter half-width.
    pub scale_jitter: f64,
    pub reg_weight: f64,
    /// Batch gradients with a larger global ℓ2 norm are rescaled to this norm.
    pub grad_clip: f64,
    /// Heavy-ball momentum; 0 gives plain SGD.
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            samples_per_epoch: 192,
            batch_size: 8,
            learning_rate: 0.05,
            lr_decay: 0.97,
            max_frame_gap: 10,
            shift_jitter: 0.3,
            scale_jitter: 0.15,
            reg_weight: 1.0,
            grad_clip: 1.0,
            momentum: 0.9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.samples_per_epoch == 0 {
            return Err(Error::InvalidArgument("batch_size and samples_per_epoch must be positive".into()));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.learning_rate) || !positive(self.lr_decay) {
            return Err(Error::InvalidArgument("learning rate and decay must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument("momentum must lie in [0, 1)".into()));
        }
        if !positive(self.grad_clip) {
            return Err(Error::InvalidArgument("grad_clip must be positive".into()));
        }
        if self.max_frame_gap == 0 {
            return Err(Error::InvalidArgument("max_frame_gap must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-sample loss of each epoch, measured during the epoch.
    pub epoch_losses: Vec<f64>,
    pub skipped_samples: usize,
}

#[derive(Clone, Copy, Debug)]
struct Sample {
    video: usize,
    template_frame: usize,
    search_frame: usize,
    shift: (f64, f64),
    scale: f64,
}

fn draw_sample<R: Rng>(rng: &mut R, videos: &[&VideoSequence], cfg: &TrainConfig) -> Sample {
    let video = rng.gen_range(0..videos.len());
    let len = videos[video].len();
    let gap = cfg.max_frame_gap.min(len - 1);
    let template_frame = rng.gen_range(0..len - 1);
    let search_frame = (template_frame + rng.gen_range(1..=gap)).min(len - 1);
    let j = cfg.shift_jitter;
    let s = cfg.scale_jitter;
    Sample {
        video,
        template_frame,
        search_frame,
        shift: (rng.gen_range(-j..=j), rng.gen_range(-j..=j)),
        scale: if s > 0.0 { rng.gen_range(-s..=s).exp() } else { 1.0 },
    }
}

/// Anchor labels for a target box in search-region coordinates:
/// `Some(true)` positive, `Some(false)` negative, `None` ignored.
pub fn anchor_labels(anchors: &AnchorSet, target: &BBox) -> Vec<Option<bool>> {
    anchors
        .iter()
        .map(|a| {
            let iou = a.iou(target);
            if iou > POSITIVE_IOU {
                Some(true)
            } else if iou < NEGATIVE_IOU {
                Some(false)
            } else {
                None
            }
        })
        .collect()
}

/// Loss and parameter gradients of one sample, or `None` without positives.
fn sample_gradient<T: Real>(
    model: &TrackerModel<T>,
    anchors: &AnchorSet,
    video: &VideoSequence,
    sample: &Sample,
    reg_weight: f64,
) -> Result<Option<(f64, Vec<Tensor<T>>)>> {
    let gt_t = &video.gt[sample.template_frame];
    let gt_s = &video.gt[sample.search_frame];
    let side = gt_s.w.max(gt_s.h);
    let center = BBox::new(
        gt_s.cx + sample.shift.0 * side,
        gt_s.cy + sample.shift.1 * side,
        gt_s.w * sample.scale,
        gt_s.h * sample.scale,
    );
    let (search, transform) =
        crop_square::<T>(&video.frames[sample.search_frame], &center, SEARCH_CONTEXT, SEARCH_SIZE)?;
    let target = transform.to_crop(gt_s);
    let labels = anchor_labels(anchors, &target);
    let n_pos = labels.iter().filter(|l| **l == Some(true)).count();
    if n_pos == 0 {
        return Ok(None);
    }
    let n_neg = labels.iter().filter(|l| **l == Some(false)).count().max(1);
    let template = extract_template::<T>(&video.frames[sample.template_frame], gt_t)?;

    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, true);
    let z = tape.constant(template);
    let x = tape.constant(search);
    let zf = model.encode(&mut tape, &bound, z)?;
    let xf = model.encode(&mut tape, &bound, x)?;
    let heads = model.heads(&mut tape, &bound, zf, xf)?;

    let cells = anchors.grid_h * anchors.grid_w;
    let mut cls_w = vec![T::zero(); 2 * labels.len()];
    let mut reg_w = vec![T::zero(); 4 * labels.len()];
    let mut reg_t = vec![T::zero(); 4 * labels.len()];
    for (j, label) in labels.iter().enumerate() {
        let (a, cell) = (j / cells, j % cells);
        match label {
            Some(true) => {
                cls_w[(a * 2 + 1) * cells + cell] = T::of(-0.5 / n_pos as f64);
                let off = encode(&target, &anchors.anchor(j));
                for k in 0..4 {
                    reg_w[(a * 4 + k) * cells + cell] = T::of(reg_weight / n_pos as f64);
                    reg_t[(a * 4 + k) * cells + cell] = T::of(off[k]);
                }
            }
            Some(false) => cls_w[a * 2 * cells + cell] = T::of(-0.5 / n_neg as f64),
            None => {}
        }
    }
    let logp = tape.log_softmax(heads.cls_logits, 1)?;
    let cls_loss = tape.weighted_sum(logp, cls_w)?;
    let reg_loss = tape.smooth_l1(heads.reg, reg_t, reg_w, T::of(SMOOTH_L1_BETA))?;
    let loss = tape.add(cls_loss, reg_loss)?;
    tape.backward(loss)?;
    let grads = bound
        .iter()
        .map(|&v| {
            let g = tape.grad(v).expect("parameters are trainable");
            Tensor::new(tape.shape(v), g.to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some((tape.value(loss).item().as_f64(), grads)))
}

/// Mini-batch SGD from a seeded initialisation. Per-sample gradients are
/// computed in parallel and reduced in sample order, so the result does not
/// depend on the thread count.
pub fn train_toy_tracker<T: Real>(
    videos: &[&VideoSequence],
    init: TrackerModel<T>,
    cfg: &TrainConfig,
) -> Result<(TrackerModel<T>, TrainReport)> {
    cfg.validate()?;
    if videos.is_empty() || videos.iter().any(|v| v.len() < 2) {
        return Err(Error::InvalidArgument("training needs videos with at least two frames".into()));
    }
    let mut model = init;
    let anchors = model.anchors();
    let mut report = TrainReport { epoch_losses: Vec::with_capacity(cfg.epochs), skipped_samples: 0 };
    let mut lr = cfg.learning_rate;
    let mut velocity: Vec<Tensor<T>> = model.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = stream(cfg.seed, "tracker/train", epoch as u64);
        let samples: Vec<Sample> = (0..cfg.samples_per_epoch).map(|_| draw_sample(&mut rng, videos, cfg)).collect();
        let (mut loss_sum, mut counted) = (0.0, 0usize);
        for batch in samples.chunks(cfg.batch_size) {
            let results = batch
                .par_iter()
                .map(|s| sample_gradient(&model, &anchors, videos[s.video], s, cfg.reg_weight))
                .collect::<Vec<_>>();
            let mut acc: Option<Vec<Tensor<T>>> = None;
            let mut used = 0usize;
            for r in results {
                let Some((loss, grads)) = r? else {
                    report.skipped_samples += 1;
                    continue;
                };
                loss_sum += loss;
                used += 1;
                match acc.as_mut() {
                    None => acc = Some(grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&grads) {
                            for (x, y) in a.data_mut().iter_mut().zip(g.data()) {
                                *x += *y;
                            }
                        }
                    }
                }
            }
            counted += used;
            if let Some(acc) = acc {
                let norm =
                    acc.iter().flat_map(|g| g.data()).map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt() / used as f64;
                let clip = if norm > cfg.grad_clip { cfg.grad_clip / norm } else { 1.0 };
                let step = T::of(lr * clip / used as f64);
                let mu = T::of(cfg.momentum);
                for ((p, v), g) in model.params_mut().iter_mut().zip(&mut velocity).zip(&acc) {
                    for ((x, m), y) in p.data_mut().iter_mut().zip(v.data_mut()).zip(g.data()) {
                        *m = mu * *m + step * *y;
                        *x -= *m;
                    }
                }
            }
        }
        report.epoch_losses.push(if counted > 0 { loss_sum / counted as f64 } else { 0.0 });
        lr *= cfg.lr_decay;
    }
    Ok((model, report))
}
