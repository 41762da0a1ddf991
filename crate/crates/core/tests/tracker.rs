mod common;

use std::sync::OnceLock;

use common::fixtures::{tiny_corpus, train_victim};
use eusa::corpus::{generate_corpus, CorpusConfig, Split, VideoSequence};
use eusa::diffnum::Tensor;
use eusa::eval::success_auc;
use eusa::geometry::BBox;
use eusa::image::Image;
use eusa::perturbation::Perturbation;
use eusa::tracker::*;
use proptest::prelude::*;

fn ramp_frame() -> Image {
    Image::new(128, 128, (0..128 * 128 * 3).map(|i| ((i * 7) % 251) as u8).collect()).unwrap()
}

#[test]
fn centered_search_crop_is_a_pure_window() {
    let frame = ramp_frame();
    let b = BBox::new(64.0, 64.0, 32.0, 32.0);
    let region = extract_search_region::<f64>(&frame, &b).unwrap();
    let t = region.transform;
    assert_eq!((t.origin_x, t.origin_y, t.scale), (32.0, 32.0, 1.0));
    let back = t.to_frame(&t.to_crop(&b));
    assert_eq!(back.center_distance(&b), 0.0);
}

#[test]
fn corner_crop_pads_with_channel_means() {
    let frame = ramp_frame();
    let means = frame.channel_means();
    let region = extract_search_region::<f64>(&frame, &BBox::new(6.0, 6.0, 12.0, 12.0)).unwrap();
    // Top-left crop pixel lies outside the frame.
    for (c, &m) in means.iter().enumerate() {
        assert!((region.pixels.data()[c * 64 * 64] - m).abs() < 1e-9);
    }
}

#[test]
fn degenerate_box_is_rejected() {
    assert!(extract_search_region::<f64>(&ramp_frame(), &BBox::new(50.0, 50.0, 0.0, 10.0)).is_err());
}

#[test]
fn template_embedding_shape_and_sensitivity() {
    let model = TrackerModel::<f64>::default_init(0);
    let frame = ramp_frame();
    let b = BBox::new(60.0, 60.0, 20.0, 20.0);
    let z = extract_template::<f64>(&frame, &b).unwrap();
    let f = template_embed(&z, &model).unwrap();
    assert_eq!(f.shape(), &[32, 12, 12]);
    assert_eq!(f, template_embed(&z, &model).unwrap());
    let shifted = extract_template::<f64>(&frame, &BBox::new(61.0, 60.0, 20.0, 20.0)).unwrap();
    assert_ne!(f, template_embed(&shifted, &model).unwrap());
}

#[test]
fn predictions_are_probabilities_and_deterministic() {
    let model = TrackerModel::<f64>::default_init(1);
    let frame = ramp_frame();
    let b = BBox::new(64.0, 64.0, 24.0, 24.0);
    let z = template_embed(&extract_template::<f64>(&frame, &b).unwrap(), &model).unwrap();
    let x = template_embed(&extract_search_region::<f64>(&frame, &b).unwrap().pixels, &model).unwrap();
    let (cls, reg) = predict(&z, &x, &model).unwrap();
    let n = model.anchor_count() * model.grid_size() * model.grid_size();
    assert_eq!(cls.scores.len(), n);
    assert_eq!(reg.offsets.len(), n);
    assert!(cls.scores.iter().all(|&c| c > 0.0 && c < 1.0));
    assert_eq!((cls, reg), predict(&z, &x, &model).unwrap());
}

proptest! {
    #[test]
    fn anchor_encoding_round_trips(
        cx in 0.0f64..64.0, cy in 0.0f64..64.0, w in 4.0f64..60.0, h in 4.0f64..60.0,
        aw in 8.0f64..48.0, ah in 8.0f64..48.0,
    ) {
        let anchor = BBox::new(32.0, 32.0, aw, ah);
        let target = BBox::new(cx, cy, w, h);
        let back = decode(encode(&target, &anchor), &anchor);
        for (a, b) in [(back.cx, cx), (back.cy, cy), (back.w, w), (back.h, h)] {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn zero_perturbation_is_an_additive_identity() {
    let corpus = tiny_corpus(2, 8, 21);
    let model = TrackerModel::<f64>::default_init(2);
    let zero = Perturbation::zeros(16.0);
    for policy in [ReinitPolicy::Otb, ReinitPolicy::Vot] {
        let v = &corpus.videos[0];
        assert_eq!(
            track_sequence(&model, v, None, policy).unwrap(),
            track_sequence(&model, v, Some(&zero), policy).unwrap()
        );
    }
}

#[test]
fn otb_policy_never_fails() {
    let corpus = tiny_corpus(3, 10, 22);
    let model = TrackerModel::<f64>::default_init(3);
    let loud = Perturbation::new(
        Tensor::from_fn(&Perturbation::<f64>::shape(), |i| if i % 2 == 0 { 16.0 } else { -16.0 }),
        16.0,
    )
    .unwrap();
    for v in &corpus.videos {
        let r = track_sequence(&model, v, Some(&loud), ReinitPolicy::Otb).unwrap();
        assert_eq!(r.failures, 0);
        assert!(r.frames.iter().all(|f| f.status != FrameStatus::Failure));
    }
}

/// Constant frames with a ground truth that jumps far away at frame 2.
fn teleporting_video() -> VideoSequence {
    let frame = Image::filled(128, 128, [120, 80, 40]);
    let near = BBox::new(30.0, 30.0, 16.0, 16.0);
    let far = BBox::new(100.0, 100.0, 16.0, 16.0);
    let gt = (0..12).map(|t| if t < 2 { near } else { far }).collect();
    VideoSequence { id: 0, split: Split::Holdout, frames: vec![frame; 12], gt }
}

#[test]
fn vot_policy_skips_then_reinitialises() {
    let model = TrackerModel::<f64>::default_init(4);
    let r = track_sequence(&model, &teleporting_video(), None, ReinitPolicy::Vot).unwrap();
    let statuses: Vec<FrameStatus> = r.frames.iter().map(|f| f.status).collect();
    use FrameStatus::*;
    assert_eq!(&statuses[..9], &[Init, Tracked, Failure, Skipped, Skipped, Skipped, Skipped, Skipped, Init]);
    assert_eq!(r.failures, 1);
    assert_eq!(r.frames[8].since_reinit, Some(0));
    assert_eq!(r.frames[9].since_reinit, Some(1));
    let otb = track_sequence(&model, &teleporting_video(), None, ReinitPolicy::Otb).unwrap();
    assert_eq!(otb.failures, 0);
}

#[test]
fn reinitialised_template_equals_ground_truth_embedding() {
    let model = TrackerModel::<f64>::default_init(5);
    let video = tiny_corpus(2, 6, 23).videos.remove(1);
    let tracker = Tracker::init(&model, &video.frames[4], video.gt[4]).unwrap();
    let direct = template_embed(&extract_template::<f64>(&video.frames[4], &video.gt[4]).unwrap(), &model).unwrap();
    assert_eq!(tracker.template_features(), &direct);
}

#[test]
fn single_frame_video_is_rejected() {
    let mut v = teleporting_video();
    v.frames.truncate(1);
    v.gt.truncate(1);
    assert!(track_sequence(&TrackerModel::<f64>::default_init(0), &v, None, ReinitPolicy::Otb).is_err());
}

fn trained() -> &'static (TrackerModel<f64>, TrainReport) {
    static MODEL: OnceLock<(TrackerModel<f64>, TrainReport)> = OnceLock::new();
    MODEL.get_or_init(train_victim)
}

#[test]
fn training_loss_decreases_over_first_epochs() {
    let corpus = generate_corpus(&CorpusConfig::default()).unwrap();
    let cfg = TrainConfig { epochs: 3, ..Default::default() };
    let (_, report) = train_toy_tracker(&corpus.train(), TrackerModel::<f64>::default_init(9), &cfg).unwrap();
    let losses = &report.epoch_losses;
    assert!(losses[0] > losses[1] && losses[1] > losses[2], "{losses:?}");
}

#[test]
fn training_is_deterministic() {
    let corpus = tiny_corpus(3, 6, 24);
    let cfg = TrainConfig { epochs: 2, samples_per_epoch: 16, ..Default::default() };
    let run = || {
        train_toy_tracker(&corpus.videos.iter().collect::<Vec<_>>(), TrackerModel::<f64>::default_init(1), &cfg)
            .unwrap()
    };
    let (a, ra) = run();
    let (b, rb) = run();
    assert_eq!(write_model(&a), write_model(&b));
    assert_eq!(ra, rb);
}

#[test]
fn trained_model_beats_untrained() {
    let holdout = generate_corpus(&CorpusConfig { seed: 77, ..Default::default() }).unwrap();
    let videos = holdout.holdout();
    let auc = |m: &TrackerModel<f64>| {
        let runs: Vec<_> = videos.iter().map(|v| track_sequence(m, v, None, ReinitPolicy::Otb).unwrap()).collect();
        success_auc(&runs.iter().collect::<Vec<_>>()).unwrap()
    };
    let (clean, untrained) = (auc(&trained().0), auc(&TrackerModel::default_init(1)));
    assert!(clean > untrained, "trained {clean} vs untrained {untrained}");
}

#[test]
fn trained_model_holds_a_static_target() {
    let cfg = CorpusConfig { speed_range: [0.0, 0.0], jitter: 0.0, scale_drift: 0.0, seed: 31, ..Default::default() };
    let corpus = generate_corpus(&cfg).unwrap();
    let ious: Vec<f64> = corpus
        .holdout()
        .iter()
        .flat_map(|v| track_sequence(&trained().0, v, None, ReinitPolicy::Otb).unwrap().frames)
        .filter(|f| f.status == FrameStatus::Tracked)
        .filter_map(|f| f.iou)
        .collect();
    let mean = ious.iter().sum::<f64>() / ious.len() as f64;
    assert!(mean > 0.5, "mean IoU {mean}");
}
