use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::tracker::{FrameStatus, ReinitPolicy, TrackResult};

/// Centre-error thresholds of the precision curve, pixels.
pub const PRECISION_THRESHOLDS: std::ops::RangeInclusive<u32> = 0..=50;
pub const PRECISION_AT: u32 = 20;
/// Number of IoU thresholds `0.00, 0.05, ..., 1.00`.
pub const SUCCESS_STEPS: usize = 21;
/// Frames after each re-initialisation excluded from VOT accuracy.
pub const BURN_IN: usize = 10;
/// Sequence lengths averaged by the simplified EAO.
pub const EAO_RANGE: std::ops::RangeInclusive<usize> = 10..=30;
/// Robustness is reported as failures per this many frames.
pub const ROBUSTNESS_UNIT: f64 = 25.0;

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

pub fn success_thresholds() -> Vec<f64> {
    (0..SUCCESS_STEPS).map(|i| i as f64 / (SUCCESS_STEPS - 1) as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
}

/// Fraction of centre errors `<= t` for `t = 0..=50` px.
pub fn precision_from_errors(errors: &[f64]) -> Result<Curve> {
    if errors.is_empty() {
        return Err(Error::InvalidArgument("precision needs at least one evaluated frame".into()));
    }
    let thresholds: Vec<f64> = PRECISION_THRESHOLDS.map(f64::from).collect();
    let values =
        thresholds.iter().map(|&t| errors.iter().filter(|&&e| e <= t).count() as f64 / errors.len() as f64).collect();
    Ok(Curve { thresholds, values })
}

/// Fraction of overlaps strictly above each of the 21 thresholds.
pub fn success_from_ious(ious: &[f64]) -> Result<Curve> {
    if ious.is_empty() {
        return Err(Error::InvalidArgument("success needs at least one evaluated frame".into()));
    }
    let thresholds = success_thresholds();
    let values =
        thresholds.iter().map(|&t| ious.iter().filter(|&&o| o > t).count() as f64 / ious.len() as f64).collect();
    Ok(Curve { thresholds, values })
}

impl Curve {
    pub fn at(&self, threshold: f64) -> f64 {
        let i = self.thresholds.iter().position(|&t| t == threshold).expect("threshold on the curve");
        self.values[i]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn errors_of(result: &TrackResult) -> Vec<f64> {
    result.evaluated().filter_map(|f| f.center_error).collect()
}

fn ious_of(result: &TrackResult) -> Vec<f64> {
    result.evaluated().filter_map(|f| f.iou).collect()
}

/// Precision curve over the evaluated frames of one or more runs (pooled).
pub fn precision_curve(results: &[&TrackResult]) -> Result<Curve> {
    precision_from_errors(&results.iter().flat_map(|r| errors_of(r)).collect::<Vec<_>>())
}

pub fn success_curve(results: &[&TrackResult]) -> Result<Curve> {
    success_from_ious(&results.iter().flat_map(|r| ious_of(r)).collect::<Vec<_>>())
}

/// Area under the success curve, the mean over its 21 thresholds.
pub fn success_auc(results: &[&TrackResult]) -> Result<f64> {
    Ok(success_curve(results)?.mean())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VotMetrics {
    /// Mean IoU over valid frames, in `[0, 1]`.
    pub accuracy: f64,
    /// Failures per 25 frames.
    pub robustness: f64,
    pub eao: f64,
    pub failures: usize,
    pub frames: usize,
}

fn accuracy_ious(result: &TrackResult) -> impl Iterator<Item = f64> + '_ {
    result
        .frames
        .iter()
        .filter(|f| f.status == FrameStatus::Tracked)
        .filter(|f| !matches!(f.since_reinit, Some(k) if k <= BURN_IN))
        .filter_map(|f| f.iou)
}

/// Overlap curve from frame 1 on, zero from the first failure onwards.
fn overlap_curve(result: &TrackResult) -> Vec<f64> {
    let mut failed = false;
    result.frames[1..]
        .iter()
        .map(|f| {
            failed |= f.status != FrameStatus::Tracked;
            if failed {
                0.0
            } else {
                f.iou.unwrap_or(0.0)
            }
        })
        .collect()
}

/// Mean over `Ns` in 10..=30 of the expected average overlap of the first
/// `Ns` frames, curves zero-padded past their end.
fn simplified_eao(curves: &[Vec<f64>]) -> f64 {
    let per_length = EAO_RANGE
        .map(|ns| curves.iter().map(|c| c.iter().take(ns).sum::<f64>() / ns as f64).sum::<f64>() / curves.len() as f64);
    let n = EAO_RANGE.count() as f64;
    per_length.sum::<f64>() / n
}

/// Accuracy, robustness and simplified EAO pooled over runs made under the VOT policy.
pub fn vot_metrics(results: &[&TrackResult]) -> Result<VotMetrics> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("vot metrics need at least one run".into()));
    }
    if let Some(r) = results.iter().find(|r| r.policy != ReinitPolicy::Vot) {
        return Err(Error::InvalidArgument(format!(
            "vot metrics need runs under the vot policy, video {} used {:?}",
            r.video_id, r.policy
        )));
    }
    let ious: Vec<f64> = results.iter().flat_map(|r| accuracy_ious(r)).collect();
    let accuracy = if ious.is_empty() { 0.0 } else { ious.iter().sum::<f64>() / ious.len() as f64 };
    let failures: usize =
        results.iter().map(|r| r.frames.iter().filter(|f| f.status == FrameStatus::Failure).count()).sum();
    let frames: usize = results.iter().map(|r| r.frames.len()).sum();
    let curves: Vec<Vec<f64>> = results.iter().map(|r| overlap_curve(r)).collect();
    Ok(VotMetrics {
        accuracy,
        robustness: failures as f64 * ROBUSTNESS_UNIT / frames as f64,
        eao: simplified_eao(&curves),
        failures,
        frames,
    })
}
