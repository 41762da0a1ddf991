//! Deterministic synthetic videos: one textured object moving over a
//! filtered-noise background, with its exact bounding box as ground truth.

mod generate;
mod ppm;
mod store;

use serde::{Deserialize, Serialize};

use crate::geometry::BBox;
use crate::image::Image;

pub use generate::generate_corpus;
pub use ppm::{read_ppm, write_ppm};
pub use store::{load_corpus, save_corpus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectShape {
    Rectangle,
    Ellipse,
    Triangle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Holdout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub n_videos: usize,
    pub frames_per_video: usize,
    pub frame_width: usize,
    pub frame_height: usize,
    pub shapes: Vec<ObjectShape>,
    /// Range of the object's longer side, pixels.
    pub object_size: [f64; 2],
    /// Range of width / height.
    pub aspect_range: [f64; 2],
    /// Standard deviation of the per-pixel texture noise.
    pub texture_noise: f64,
    /// Mean per-channel difference between the two stripe colours of an object.
    pub stripe_contrast: f64,
    /// Half-range of the smooth background variation around its base colour.
    pub background_amplitude: f64,
    /// Object speed range, pixels per frame.
    pub speed_range: [f64; 2],
    pub direction_change_prob: f64,
    /// Standard deviation of the per-frame positional jitter, pixels.
    pub jitter: f64,
    /// Maximum absolute per-frame log-scale drift.
    pub scale_drift: f64,
    /// Fraction of videos placed in the holdout split (the last ids).
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            n_videos: 20,
            frames_per_video: 40,
            frame_width: 128,
            frame_height: 128,
            shapes: vec![ObjectShape::Rectangle, ObjectShape::Ellipse, ObjectShape::Triangle],
            object_size: [20.0, 32.0],
            aspect_range: [0.75, 1.33],
            texture_noise: 10.0,
            stripe_contrast: 150.0,
            background_amplitude: 35.0,
            speed_range: [0.5, 2.5],
            direction_change_prob: 0.05,
            jitter: 0.3,
            scale_drift: 0.004,
            holdout_fraction: 0.5,
            seed: 0,
        }
    }
}

impl CorpusConfig {
    /// Number of holdout videos; both splits are nonempty for valid configs.
    pub fn holdout_count(&self) -> usize {
        ((self.n_videos as f64 * self.holdout_fraction).round() as usize).clamp(1, self.n_videos.saturating_sub(1))
    }

    pub fn split_of(&self, id: usize) -> Split {
        if id >= self.n_videos - self.holdout_count() {
            Split::Holdout
        } else {
            Split::Train
        }
    }
}

/// Ordered frames with one ground-truth box each.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoSequence {
    pub id: usize,
    pub split: Split,
    pub frames: Vec<Image>,
    pub gt: Vec<BBox>,
}

impl VideoSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoCorpus {
    pub config: CorpusConfig,
    pub videos: Vec<VideoSequence>,
}

impl VideoCorpus {
    pub fn split(&self, split: Split) -> Vec<&VideoSequence> {
        self.videos.iter().filter(|v| v.split == split).collect()
    }

    pub fn train(&self) -> Vec<&VideoSequence> {
        self.split(Split::Train)
    }

    pub fn holdout(&self) -> Vec<&VideoSequence> {
        self.split(Split::Holdout)
    }
}
