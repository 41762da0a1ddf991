//! Encoder F, classifier C and regressor R of the toy tracker.

use crate::diffnum::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::{gaussian, stream};
use crate::scalar::Real;

use super::anchors::AnchorSet;
use super::{DEFAULT_ANCHORS, DEFAULT_WINDOW_WEIGHT, SEARCH_SIZE, TEMPLATE_SIZE};

/// Parameter names in storage order.
pub const PARAM_NAMES: [&str; 10] = [
    "encoder.conv1.weight",
    "encoder.conv1.bias",
    "encoder.conv2.weight",
    "encoder.conv2.bias",
    "encoder.conv3.weight",
    "encoder.conv3.bias",
    "cls.weight",
    "cls.bias",
    "reg.weight",
    "reg.bias",
];

const ENCODER_STRIDES: [usize; 3] = [1, 2, 1];
const KERNEL: usize = 3;

/// Channel widths of the three encoder layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelDims {
    pub conv1: usize,
    pub conv2: usize,
    pub conv3: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims { conv1: 16, conv2: 32, conv3: 32 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerModel<T: Real = f64> {
    params: Vec<Tensor<T>>,
    pub anchor_shapes: Vec<(f64, f64)>,
    /// Blend between classifier scores (0) and the cosine window (1).
    pub window_weight: f64,
}

/// Head outputs recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct HeadVars {
    /// `[A, 2, H, W]`, channel 1 is foreground.
    pub cls_logits: Var,
    /// `[N]` foreground probabilities, `N = A*H*W`.
    pub fg: Var,
    /// `[A, 4, H, W]` as `(dx, dy, dw, dh)`.
    pub reg: Var,
}

fn conv_out(len: usize, stride: usize) -> usize {
    (len - KERNEL) / stride + 1
}

/// Spatial extent of the encoder output for a square input of side `size`.
pub fn feature_size(size: usize) -> usize {
    ENCODER_STRIDES.iter().fold(size, |s, &st| conv_out(s, st))
}

impl<T: Real> TrackerModel<T> {
    /// He-initialised weights, zero biases; deterministic in `seed`.
    pub fn init(dims: ModelDims, anchor_shapes: Vec<(f64, f64)>, seed: u64) -> Self {
        let mut rng = stream(seed, "tracker/init", 0);
        let a = anchor_shapes.len();
        let layers = [
            (dims.conv1, 3, KERNEL, 1.0),
            (dims.conv2, dims.conv1, KERNEL, 1.0),
            (dims.conv3, dims.conv2, KERNEL, 1.0),
            (2 * a, dims.conv3, 1, 0.1),
            (4 * a, dims.conv3, 1, 0.1),
        ];
        let mut params = Vec::with_capacity(10);
        for (out_c, in_c, k, gain) in layers {
            let std = gain * (2.0 / (in_c * k * k) as f64).sqrt();
            params.push(Tensor::from_fn(&[out_c, in_c, k, k], |_| T::of(std * gaussian(&mut rng))));
            params.push(Tensor::zeros(&[out_c]));
        }
        TrackerModel { params, anchor_shapes, window_weight: DEFAULT_WINDOW_WEIGHT }
    }

    pub fn default_init(seed: u64) -> Self {
        Self::init(ModelDims::default(), DEFAULT_ANCHORS.to_vec(), seed)
    }

    /// Assembles a model from named tensors, checking the head/anchor invariants.
    pub fn from_params(params: Vec<Tensor<T>>, anchor_shapes: Vec<(f64, f64)>, window_weight: f64) -> Result<Self> {
        if params.len() != PARAM_NAMES.len() {
            return Err(Error::shape("tracker model", "parameter count", PARAM_NAMES.len(), params.len()));
        }
        if !(0.0..=1.0).contains(&window_weight) {
            return Err(Error::InvalidArgument(format!("window_weight {window_weight} outside [0,1]")));
        }
        let model = TrackerModel { params, anchor_shapes, window_weight };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let a = self.anchor_shapes.len();
        if a == 0 {
            return Err(Error::InvalidArgument("at least one anchor shape is required".into()));
        }
        let p = &self.params;
        let c3 = p[4].shape()[0];
        let expect = |i: usize, shape: &[usize]| -> Result<()> {
            if p[i].shape() != shape {
                return Err(Error::shape(
                    "tracker model",
                    PARAM_NAMES[i],
                    format!("{shape:?}"),
                    format!("{:?}", p[i].shape()),
                ));
            }
            Ok(())
        };
        let (c1, c2) = (p[0].shape()[0], p[2].shape()[0]);
        expect(0, &[c1, 3, KERNEL, KERNEL])?;
        expect(1, &[c1])?;
        expect(2, &[c2, c1, KERNEL, KERNEL])?;
        expect(3, &[c2])?;
        expect(4, &[c3, c2, KERNEL, KERNEL])?;
        expect(5, &[c3])?;
        expect(6, &[2 * a, c3, 1, 1])?;
        expect(7, &[2 * a])?;
        expect(8, &[4 * a, c3, 1, 1])?;
        expect(9, &[4 * a])
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn feature_channels(&self) -> usize {
        self.params[4].shape()[0]
    }

    pub fn anchor_count(&self) -> usize {
        self.anchor_shapes.len()
    }

    /// Side of the correlation grid for the fixed template and search sizes.
    pub fn grid_size(&self) -> usize {
        feature_size(SEARCH_SIZE) - feature_size(TEMPLATE_SIZE) + 1
    }

    /// Anchor layout matching the head outputs: template pixel `u` aligns with
    /// search pixel `u + stride * cell`, so cell `g` is centred at
    /// `TEMPLATE_SIZE / 2 + stride * g`.
    pub fn anchors(&self) -> AnchorSet {
        let stride = ENCODER_STRIDES.iter().product::<usize>() as f64;
        AnchorSet {
            shapes: self.anchor_shapes.clone(),
            grid_h: self.grid_size(),
            grid_w: self.grid_size(),
            stride,
            origin: TEMPLATE_SIZE as f64 / 2.0,
        }
    }

    /// Records every parameter on `tape`, as trainable leaves or constants.
    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> Vec<Var> {
        self.params.iter().map(|p| if trainable { tape.param(p.clone()) } else { tape.constant(p.clone()) }).collect()
    }

    /// Encoder F on a `[3, S, S]` image of raw pixel values in `[0, 255]`.
    pub fn encode(&self, tape: &mut Tape<T>, bound: &[Var], image: Var) -> Result<Var> {
        let mut x = tape.affine(image, T::of(1.0 / 64.0), T::of(-2.0));
        for (layer, &stride) in ENCODER_STRIDES.iter().enumerate() {
            x = tape.conv2d(x, bound[2 * layer], stride, 0)?;
            x = tape.bias_add(x, bound[2 * layer + 1])?;
            if layer + 1 < ENCODER_STRIDES.len() {
                x = tape.relu(x);
            }
        }
        Ok(x)
    }

    /// Depthwise correlation followed by the classification and regression heads.
    pub fn heads(&self, tape: &mut Tape<T>, bound: &[Var], template_feat: Var, search_feat: Var) -> Result<HeadVars> {
        let ts = tape.shape(template_feat).to_vec();
        let corr = tape.xcorr_depthwise(search_feat, template_feat)?;
        let corr = tape.scale(corr, T::of(1.0 / (ts[1] * ts[2]) as f64));
        let (gh, gw) = (tape.shape(corr)[1], tape.shape(corr)[2]);
        let a = self.anchor_count();

        let cls = tape.conv2d(corr, bound[6], 1, 0)?;
        let cls = tape.bias_add(cls, bound[7])?;
        let cls_logits = tape.reshape(cls, &[a, 2, gh, gw])?;
        let probs = tape.softmax(cls_logits, 1)?;
        let fg = tape.narrow(probs, 1, 1, 1)?;
        let fg = tape.reshape(fg, &[a * gh * gw])?;

        let reg = tape.conv2d(corr, bound[8], 1, 0)?;
        let reg = tape.bias_add(reg, bound[9])?;
        let reg = tape.reshape(reg, &[a, 4, gh, gw])?;
        Ok(HeadVars { cls_logits, fg, reg })
    }

    /// Element type conversion of all weights.
    pub fn cast<U: Real>(&self) -> TrackerModel<U> {
        TrackerModel {
            params: self.params.iter().map(Tensor::cast).collect(),
            anchor_shapes: self.anchor_shapes.clone(),
            window_weight: self.window_weight,
        }
    }
}
