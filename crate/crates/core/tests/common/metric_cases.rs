//! Hand-built track results with known metric values.

use eusa::geometry::BBox;
use eusa::tracker::{FrameRecord, FrameStatus, ReinitPolicy, TrackResult};

pub const GT: BBox = BBox { cx: 50.0, cy: 50.0, w: 20.0, h: 20.0 };

pub fn frame(status: FrameStatus, iou: Option<f64>, err: Option<f64>, since: Option<usize>) -> FrameRecord {
    FrameRecord {
        status,
        gt: GT,
        prediction: if status == FrameStatus::Skipped { None } else { Some(GT) },
        iou,
        center_error: err,
        since_reinit: since,
    }
}

pub fn init() -> FrameRecord {
    frame(FrameStatus::Init, None, None, None)
}

pub fn tracked(iou: f64) -> FrameRecord {
    frame(FrameStatus::Tracked, Some(iou), Some(0.0), None)
}

pub fn result(id: usize, policy: ReinitPolicy, frames: Vec<FrameRecord>) -> TrackResult {
    let failures = frames.iter().filter(|f| f.status == FrameStatus::Failure).count();
    TrackResult { video_id: id, policy, frames, failures }
}

pub fn with_errors(errors: &[f64]) -> TrackResult {
    let mut frames = vec![init()];
    frames.extend(errors.iter().map(|&e| frame(FrameStatus::Tracked, Some(0.5), Some(e), None)));
    result(0, ReinitPolicy::Otb, frames)
}

pub fn with_ious(policy: ReinitPolicy, ious: &[f64]) -> TrackResult {
    let mut frames = vec![init()];
    frames.extend(ious.iter().map(|&o| tracked(o)));
    result(0, policy, frames)
}

/// Expected VOT values of [`three_videos`].
pub struct VotExpectation {
    pub accuracy: f64,
    pub robustness: f64,
    pub eao: f64,
    pub failures: usize,
}

/// A clean run, a run with one failure and re-init, and a run with one poor
/// frame, 36 frames in total.
pub fn three_videos() -> (Vec<TrackResult>, VotExpectation) {
    let a = with_ious(ReinitPolicy::Vot, &[0.5; 11]);
    let mut b = vec![init(), tracked(0.8), tracked(0.8), frame(FrameStatus::Failure, Some(0.0), Some(30.0), None)];
    b.extend((0..5).map(|_| frame(FrameStatus::Skipped, None, None, None)));
    b.push(frame(FrameStatus::Init, None, None, Some(0)));
    b.push(frame(FrameStatus::Tracked, Some(0.9), Some(1.0), Some(1)));
    b.push(frame(FrameStatus::Tracked, Some(0.9), Some(1.0), Some(2)));
    let b = result(1, ReinitPolicy::Vot, b);
    let mut c_ious = [1.0; 11];
    c_ious[4] = 0.2;
    let c = with_ious(ReinitPolicy::Vot, &c_ious);

    // Valid frames: 11 of A, the two pre-failure frames of B (the two after
    // re-init are burn-in), 11 of C.
    let accuracy = (5.5 + 1.6 + 10.2) / 24.0;
    // Overlap curves have 11 entries; sums of the first 10 are 5.0, 1.6, 9.2
    // and of all 11 are 5.5, 1.6, 10.2.
    let mut eao = 15.8 / (3.0 * 10.0);
    for ns in 11..=30 {
        eao += 17.3 / (3.0 * ns as f64);
    }
    eao /= 21.0;
    (vec![a, b, c], VotExpectation { accuracy, robustness: 25.0 / 36.0, eao, failures: 1 })
}

/// Fraction of IoUs above each of the 21 thresholds, averaged.
pub fn brute_force_auc(ious: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..21 {
        let t = i as f64 / 20.0;
        let mut hits = 0;
        for &o in ious {
            if o > t {
                hits += 1;
            }
        }
        total += hits as f64 / ious.len() as f64;
    }
    total / 21.0
}
