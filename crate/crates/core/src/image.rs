//! 8-bit RGB frames and the bilinear crop used for template and search regions.

use crate::diffnum::Tensor;
use crate::error::{Error, Result};
use crate::geometry::{BBox, CropTransform};
use crate::scalar::Real;

/// Interleaved RGB image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::shape("image", "data length", width * height * 3, data.len()));
        }
        Ok(Image { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        Image { width, height, data }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Per-channel mean, used to pad crops that leave the frame.
    pub fn channel_means(&self) -> [f64; 3] {
        let mut sums = [0u64; 3];
        for px in self.data.chunks_exact(3) {
            for c in 0..3 {
                sums[c] += px[c] as u64;
            }
        }
        let n = (self.width * self.height) as f64;
        sums.map(|s| s as f64 / n)
    }

    /// `[3, H, W]` tensor of raw pixel values.
    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        let (w, h) = (self.width, self.height);
        Tensor::from_fn(&[3, h, w], |i| {
            let c = i / (w * h);
            let p = i % (w * h);
            T::of(self.data[p * 3 + c] as f64)
        })
    }
}

/// Square crop of side `context * max(w, h)` centred on `b`, bilinearly
/// resampled to `out_size x out_size`; samples outside the frame read the
/// frame's channel mean.
pub fn crop_square<T: Real>(
    frame: &Image,
    b: &BBox,
    context: f64,
    out_size: usize,
) -> Result<(Tensor<T>, CropTransform)> {
    if b.is_degenerate() {
        return Err(Error::InvalidArgument(format!("degenerate box (w={}, h={}) cannot be cropped", b.w, b.h)));
    }
    let side = context * b.w.max(b.h);
    let transform =
        CropTransform { origin_x: b.cx - side / 2.0, origin_y: b.cy - side / 2.0, scale: out_size as f64 / side };
    let means = frame.channel_means();
    let step = side / out_size as f64;
    let (fw, fh) = (frame.width as isize, frame.height as isize);
    let mut data = vec![T::zero(); 3 * out_size * out_size];
    let sample = |x: isize, y: isize, c: usize| -> f64 {
        if x < 0 || y < 0 || x >= fw || y >= fh {
            means[c]
        } else {
            frame.data[((y * fw + x) as usize) * 3 + c] as f64
        }
    };
    for oy in 0..out_size {
        let v = transform.origin_y + (oy as f64 + 0.5) * step - 0.5;
        let y0 = v.floor();
        let fy = v - y0;
        let y0 = y0 as isize;
        for ox in 0..out_size {
            let u = transform.origin_x + (ox as f64 + 0.5) * step - 0.5;
            let x0 = u.floor();
            let fx = u - x0;
            let x0 = x0 as isize;
            for c in 0..3 {
                let top = sample(x0, y0, c) * (1.0 - fx) + if fx > 0.0 { sample(x0 + 1, y0, c) * fx } else { 0.0 };
                let value = if fy > 0.0 {
                    let bottom = sample(x0, y0 + 1, c) * (1.0 - fx)
                        + if fx > 0.0 { sample(x0 + 1, y0 + 1, c) * fx } else { 0.0 };
                    top * (1.0 - fy) + bottom * fy
                } else {
                    top
                };
                data[(c * out_size + oy) * out_size + ox] = T::of(value);
            }
        }
    }
    Ok((Tensor::new(&[3, out_size, out_size], data)?, transform))
}
