//! Toy anchor-based Siamese tracker: shared encoder, depthwise correlation,
//! classification and regression heads, window-blended box selection, the
//! tracking loop with optional re-initialisation, and supervised training.

mod anchors;
mod infer;
mod model;
mod session;
mod train;
mod weights;

pub use anchors::{decode, encode, AnchorSet, LOG_SCALE_CLAMP};
pub use infer::{
    apply_perturbation, extract_search_region, extract_template, hanning_window, predict, select_box, template_embed,
    ClassificationOutput, RegressionOutput, SearchRegion,
};
pub use model::{feature_size, HeadVars, ModelDims, TrackerModel, PARAM_NAMES};
pub use session::{track_sequence, FrameRecord, FrameStatus, ReinitPolicy, TrackResult, Tracker, TrackerState};
pub use train::{train_toy_tracker, TrainConfig, TrainReport};
pub use weights::{load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};

pub const SEARCH_SIZE: usize = 64;
pub const SEARCH_CONTEXT: f64 = 2.0;
pub const TEMPLATE_SIZE: usize = 32;
pub const TEMPLATE_CONTEXT: f64 = 1.5;
/// Anchor shapes `(w, h)` in search-region pixels.
pub const DEFAULT_ANCHORS: [(f64, f64); 3] = [(32.0, 32.0), (48.0, 24.0), (24.0, 48.0)];
pub const DEFAULT_WINDOW_WEIGHT: f64 = 0.3;
/// Smallest box side the tracker will report, frame pixels.
pub const MIN_BOX_SIZE: f64 = 4.0;
/// Upper end of the pixel range perturbed search regions are clamped into.
pub const PIXEL_MAX: f64 = 255.0;
