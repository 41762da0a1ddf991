use serde::{Deserialize, Serialize};

use crate::corpus::VideoSequence;
use crate::diffnum::Tensor;
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::image::Image;
use crate::perturbation::Perturbation;
use crate::scalar::Real;

use super::infer::{apply_perturbation, extract_search_region, extract_template, predict, select_box, template_embed};
use super::model::TrackerModel;

/// Frames skipped after a failure before the template is re-initialised.
pub const REINIT_SKIP: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReinitPolicy {
    /// Never re-initialise.
    Otb,
    /// IoU = 0 is a failure; skip 5 frames, then re-initialise from ground truth.
    Vot,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerState {
    pub bbox: BBox,
    pub failed: bool,
    pub frames_since_reinit: usize,
}

/// A live tracker: the template embedding plus the current state.
#[derive(Clone, Debug)]
pub struct Tracker<'m, T: Real = f64> {
    model: &'m TrackerModel<T>,
    template_feat: Tensor<T>,
    state: TrackerState,
}

impl<'m, T: Real> Tracker<'m, T> {
    /// Embeds the template crop of `b` in `frame`.
    pub fn init(model: &'m TrackerModel<T>, frame: &Image, b: BBox) -> Result<Self> {
        let template = extract_template(frame, &b)?;
        let template_feat = template_embed(&template, model)?;
        Ok(Tracker { model, template_feat, state: TrackerState { bbox: b, failed: false, frames_since_reinit: 0 } })
    }

    pub fn template_features(&self) -> &Tensor<T> {
        &self.template_feat
    }

    pub fn state(&self) -> &TrackerState {
        &self.state
    }

    /// Crops around the previous box, adds `delta`, predicts and updates the state.
    pub fn update(&mut self, frame: &Image, delta: Option<&Tensor<T>>) -> Result<BBox> {
        let region = extract_search_region::<T>(frame, &self.state.bbox)?;
        let pixels = match delta {
            Some(d) => apply_perturbation(&region.pixels, d)?,
            None => region.pixels,
        };
        let search_feat = template_embed(&pixels, self.model)?;
        let (cls, reg) = predict(&self.template_feat, &search_feat, self.model)?;
        let b = select_box(
            &cls,
            &reg,
            &self.model.anchors(),
            self.model.window_weight,
            &region.transform,
            (frame.width, frame.height),
        );
        self.state.bbox = b;
        self.state.frames_since_reinit += 1;
        Ok(b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameStatus {
    /// Template (re-)initialised from ground truth on this frame.
    Init,
    Tracked,
    /// IoU with ground truth was 0 under the VOT policy.
    Failure,
    /// Frame skipped while waiting to re-initialise.
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub status: FrameStatus,
    pub gt: BBox,
    pub prediction: Option<BBox>,
    pub iou: Option<f64>,
    pub center_error: Option<f64>,
    /// Frames since the most recent re-initialisation (0 on init frames);
    /// `None` until the first re-initialisation after frame 0.
    pub since_reinit: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackResult {
    pub video_id: usize,
    pub policy: ReinitPolicy,
    pub frames: Vec<FrameRecord>,
    pub failures: usize,
}

impl TrackResult {
    /// Frames carrying a tracker prediction (tracked or failed).
    pub fn evaluated(&self) -> impl Iterator<Item = &FrameRecord> {
        self.frames.iter().filter(|f| matches!(f.status, FrameStatus::Tracked | FrameStatus::Failure))
    }

    pub fn predictions(&self) -> Vec<Option<BBox>> {
        self.frames.iter().map(|f| f.prediction).collect()
    }
}

/// Runs the tracker over a whole video.
pub fn track_sequence<T: Real>(
    model: &TrackerModel<T>,
    video: &VideoSequence,
    perturbation: Option<&Perturbation<T>>,
    policy: ReinitPolicy,
) -> Result<TrackResult> {
    if video.frames.is_empty() {
        return Err(Error::InvalidArgument(format!("video {} has no frames", video.id)));
    }
    if video.frames.len() < 2 || video.gt.len() != video.frames.len() {
        return Err(Error::InvalidArgument(format!(
            "video {} needs >= 2 frames with one ground-truth box each",
            video.id
        )));
    }
    let delta = perturbation.map(|p| p.values());
    let init_record = |gt: BBox, since: Option<usize>| FrameRecord {
        status: FrameStatus::Init,
        gt,
        prediction: Some(gt),
        iou: None,
        center_error: None,
        since_reinit: since,
    };
    let mut tracker = Tracker::init(model, &video.frames[0], video.gt[0])?;
    let mut frames = vec![init_record(video.gt[0], None)];
    let mut failures = 0;
    let mut skip_left = 0usize;
    let mut reinit_pending = false;
    let mut reinitialised = false;
    for t in 1..video.frames.len() {
        let gt = video.gt[t];
        if skip_left > 0 {
            skip_left -= 1;
            reinit_pending = skip_left == 0;
            frames.push(FrameRecord {
                status: FrameStatus::Skipped,
                gt,
                prediction: None,
                iou: None,
                center_error: None,
                since_reinit: None,
            });
            continue;
        }
        if reinit_pending {
            reinit_pending = false;
            reinitialised = true;
            tracker = Tracker::init(model, &video.frames[t], gt)?;
            frames.push(init_record(gt, Some(0)));
            continue;
        }
        let pred = tracker.update(&video.frames[t], delta)?;
        let iou = pred.iou(&gt);
        let failed = policy == ReinitPolicy::Vot && iou == 0.0;
        if failed {
            failures += 1;
            skip_left = REINIT_SKIP;
            tracker.state.failed = true;
        }
        frames.push(FrameRecord {
            status: if failed { FrameStatus::Failure } else { FrameStatus::Tracked },
            gt,
            prediction: Some(pred),
            iou: Some(iou),
            center_error: Some(pred.center_distance(&gt)),
            since_reinit: reinitialised.then_some(tracker.state.frames_since_reinit),
        });
    }
    Ok(TrackResult { video_id: video.id, policy, frames, failures })
}
