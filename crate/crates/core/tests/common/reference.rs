//! Direct nested-loop references, independent of the tape kernels.

/// `input[C_in][H][W]`, `kernel[C_out][C_in][kH][kW]`, zero padding, floor output extent.
pub fn conv2d_naive(
    input: &[f64],
    in_shape: [usize; 3],
    kernel: &[f64],
    k_shape: [usize; 4],
    stride: usize,
    pad: usize,
) -> (Vec<f64>, [usize; 3]) {
    let [ci, h, w] = in_shape;
    let [co, _, kh, kw] = k_shape;
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; co * oh * ow];
    for o in 0..co {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = 0.0;
                for c in 0..ci {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (y * stride + ky) as isize - pad as isize;
                            let ix = (x * stride + kx) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            let iv = input[(c * h + iy as usize) * w + ix as usize];
                            let kv = kernel[((o * ci + c) * kh + ky) * kw + kx];
                            acc += iv * kv;
                        }
                    }
                }
                out[(o * oh + y) * ow + x] = acc;
            }
        }
    }
    (out, [co, oh, ow])
}

pub fn xcorr_naive(
    search: &[f64],
    s_shape: [usize; 3],
    template: &[f64],
    t_shape: [usize; 3],
) -> (Vec<f64>, [usize; 3]) {
    let [c, sh, sw] = s_shape;
    let [_, th, tw] = t_shape;
    let (oh, ow) = (sh - th + 1, sw - tw + 1);
    let mut out = vec![0.0; c * oh * ow];
    for ch in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = 0.0;
                for u in 0..th {
                    for v in 0..tw {
                        acc += search[(ch * sh + i + u) * sw + j + v] * template[(ch * th + u) * tw + v];
                    }
                }
                out[(ch * oh + i) * ow + j] = acc;
            }
        }
    }
    (out, [c, oh, ow])
}
