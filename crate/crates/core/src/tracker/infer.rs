use crate::diffnum::{Tape, Tensor};
use crate::error::{Error, Result};
use crate::geometry::{BBox, CropTransform};
use crate::image::{crop_square, Image};
use crate::scalar::Real;

use super::anchors::{decode, AnchorSet};
use super::model::TrackerModel;
use super::{MIN_BOX_SIZE, PIXEL_MAX, SEARCH_CONTEXT, SEARCH_SIZE, TEMPLATE_CONTEXT, TEMPLATE_SIZE};

/// A `[3, 64, 64]` search crop and the transform back to frame pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchRegion<T: Real = f64> {
    pub pixels: Tensor<T>,
    pub transform: CropTransform,
}

pub fn extract_search_region<T: Real>(frame: &Image, b: &BBox) -> Result<SearchRegion<T>> {
    let (pixels, transform) = crop_square(frame, b, SEARCH_CONTEXT, SEARCH_SIZE)?;
    Ok(SearchRegion { pixels, transform })
}

pub fn extract_template<T: Real>(frame: &Image, b: &BBox) -> Result<Tensor<T>> {
    Ok(crop_square(frame, b, TEMPLATE_CONTEXT, TEMPLATE_SIZE)?.0)
}

/// Runs the encoder on a raw-pixel image without recording gradients.
pub fn template_embed<T: Real>(image: &Tensor<T>, model: &TrackerModel<T>) -> Result<Tensor<T>> {
    if image.rank() != 3 || image.shape()[0] != 3 {
        return Err(Error::shape("template_embed", "image shape", "[3, H, W]", format!("{:?}", image.shape())));
    }
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, false);
    let x = tape.constant(image.clone());
    let f = model.encode(&mut tape, &bound, x)?;
    Ok(tape.value(f).clone())
}

/// `clamp(search + delta, 0, 255)`.
pub fn apply_perturbation<T: Real>(search: &Tensor<T>, delta: &Tensor<T>) -> Result<Tensor<T>> {
    if search.shape() != delta.shape() {
        return Err(Error::shape(
            "apply_perturbation",
            "shape",
            format!("{:?}", search.shape()),
            format!("{:?}", delta.shape()),
        ));
    }
    let hi = T::of(PIXEL_MAX);
    let data = search.data().iter().zip(delta.data()).map(|(&s, &d)| (s + d).max(T::zero()).min(hi)).collect();
    Tensor::new(search.shape(), data)
}

/// Foreground probability `C_j` for every candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationOutput {
    pub scores: Vec<f64>,
}

/// `(dx, dy, dw, dh)` for every candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionOutput {
    pub offsets: Vec<[f64; 4]>,
}

pub fn predict<T: Real>(
    template_feat: &Tensor<T>,
    search_feat: &Tensor<T>,
    model: &TrackerModel<T>,
) -> Result<(ClassificationOutput, RegressionOutput)> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, false);
    let z = tape.constant(template_feat.clone());
    let x = tape.constant(search_feat.clone());
    let heads = model.heads(&mut tape, &bound, z, x)?;
    Ok(read_heads(&tape, heads.fg, heads.reg))
}

pub(crate) fn read_heads<T: Real>(
    tape: &Tape<T>,
    fg: crate::diffnum::Var,
    reg: crate::diffnum::Var,
) -> (ClassificationOutput, RegressionOutput) {
    let scores: Vec<f64> = tape.value(fg).data().iter().map(|v| v.as_f64()).collect();
    let shape = tape.shape(reg).to_vec();
    let cells = shape[2] * shape[3];
    let r = tape.value(reg).data();
    let offsets = (0..scores.len())
        .map(|j| {
            let (a, cell) = (j / cells, j % cells);
            std::array::from_fn(|k| r[(a * 4 + k) * cells + cell].as_f64())
        })
        .collect();
    (ClassificationOutput { scores }, RegressionOutput { offsets })
}

/// Symmetric raised-cosine window of length `n`, peak 1 at the centre.
pub fn hanning_window(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n).map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / (n - 1) as f64).cos()).collect()
}

/// Index of the candidate maximising `(1-w) * C_j + w * G_j`; ties go to the lowest index.
pub fn best_candidate(cls: &ClassificationOutput, anchors: &AnchorSet, window_weight: f64) -> usize {
    let wy = hanning_window(anchors.grid_h);
    let wx = hanning_window(anchors.grid_w);
    let cells = anchors.grid_h * anchors.grid_w;
    let mut best = (0, f64::NEG_INFINITY);
    for (j, &c) in cls.scores.iter().enumerate() {
        let cell = j % cells;
        let g = wy[cell / anchors.grid_w] * wx[cell % anchors.grid_w];
        let score = (1.0 - window_weight) * c + window_weight * g;
        if score > best.1 {
            best = (j, score);
        }
    }
    best.0
}

/// Picks the best candidate, decodes it and maps it back into the frame.
pub fn select_box(
    cls: &ClassificationOutput,
    reg: &RegressionOutput,
    anchors: &AnchorSet,
    window_weight: f64,
    transform: &CropTransform,
    frame_size: (usize, usize),
) -> BBox {
    let j = best_candidate(cls, anchors, window_weight);
    let in_crop = decode(reg.offsets[j], &anchors.anchor(j));
    transform.to_frame(&in_crop).clamp_to_frame(frame_size.0 as f64, frame_size.1 as f64, MIN_BOX_SIZE)
}
