//! Raw forward/backward loops for the convolution-style operators.
//!
//! Loops are ordered so the innermost loop runs over contiguous output
//! columns whenever the stride allows it.

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeometry {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

/// Output indices `o` in `[start, end)` with `0 <= o * stride + offset < in_len`.
fn valid_range(offset: isize, stride: usize, in_len: usize, out_len: usize) -> (usize, usize) {
    let s = stride as isize;
    let start = if offset >= 0 { 0 } else { ((-offset) + s - 1) / s };
    let last = in_len as isize - 1 - offset;
    let end = if last < 0 { 0 } else { (last / s + 1).min(out_len as isize) };
    (start as usize, end.max(start) as usize)
}

#[inline]
fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail: T = chunks_a.remainder().iter().zip(chunks_b.remainder()).map(|(&x, &y)| x * y).sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl ConvGeometry {
    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Visits every in-bounds `(patch row, output position, input index)` triple
/// of the im2col matrix `[C*kh*kw, oh*ow]`, one contiguous output run at a time.
fn for_each_patch_run(g: &ConvGeometry, mut f: impl FnMut(usize, usize, usize, usize)) {
    for ic in 0..g.in_channels {
        for ky in 0..g.kernel_h {
            let oy_off = ky as isize - g.pad as isize;
            let (ys, ye) = valid_range(oy_off, g.stride, g.height, g.out_h);
            for kx in 0..g.kernel_w {
                let ox_off = kx as isize - g.pad as isize;
                let (xs, xe) = valid_range(ox_off, g.stride, g.width, g.out_w);
                if xs >= xe {
                    continue;
                }
                let row = (ic * g.kernel_h + ky) * g.kernel_w + kx;
                for oy in ys..ye {
                    let iy = ((oy * g.stride) as isize + oy_off) as usize;
                    let ix0 = ((xs * g.stride) as isize + ox_off) as usize;
                    f(row, oy * g.out_w + xs, (ic * g.height + iy) * g.width + ix0, xe - xs);
                }
            }
        }
    }
}

fn im2col<T: Real>(g: &ConvGeometry, input: &[T]) -> Vec<T> {
    let p = g.positions();
    let mut cols = vec![T::zero(); g.patch_len() * p];
    for_each_patch_run(g, |row, pos, src, len| {
        let dst = &mut cols[row * p + pos..row * p + pos + len];
        if g.stride == 1 {
            dst.copy_from_slice(&input[src..src + len]);
        } else {
            for (i, d) in dst.iter_mut().enumerate() {
                *d = input[src + i * g.stride];
            }
        }
    });
    cols
}

fn col2im_add<T: Real>(g: &ConvGeometry, cols: &[T], grad_input: &mut [T]) {
    let p = g.positions();
    for_each_patch_run(g, |row, pos, dst, len| {
        let src = &cols[row * p + pos..row * p + pos + len];
        if g.stride == 1 {
            for (d, &v) in grad_input[dst..dst + len].iter_mut().zip(src) {
                *d += v;
            }
        } else {
            for (i, &v) in src.iter().enumerate() {
                grad_input[dst + i * g.stride] += v;
            }
        }
    });
}

pub(crate) fn conv2d_forward<T: Real>(g: &ConvGeometry, input: &[T], kernel: &[T]) -> Vec<T> {
    let cols = im2col(g, input);
    let mut out = vec![T::zero(); g.out_channels * g.positions()];
    T::gemm(g.out_channels, g.patch_len(), g.positions(), kernel, false, &cols, false, T::zero(), &mut out);
    out
}

/// Accumulates input and/or kernel gradients given the output gradient.
pub(crate) fn conv2d_backward<T: Real>(
    g: &ConvGeometry,
    input: &[T],
    kernel: &[T],
    grad_out: &[T],
    grad_input: Option<&mut [T]>,
    grad_kernel: Option<&mut [T]>,
) {
    let (k, p) = (g.patch_len(), g.positions());
    if let Some(gk) = grad_kernel {
        let cols = im2col(g, input);
        T::gemm(g.out_channels, p, k, grad_out, false, &cols, true, T::one(), gk);
    }
    if let Some(gi) = grad_input {
        let mut gcols = vec![T::zero(); k * p];
        T::gemm(k, g.out_channels, p, kernel, true, grad_out, false, T::zero(), &mut gcols);
        col2im_add(g, &gcols, gi);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct XcorrGeometry {
    pub channels: usize,
    pub search_h: usize,
    pub search_w: usize,
    pub template_h: usize,
    pub template_w: usize,
    pub out_h: usize,
    pub out_w: usize,
}

pub(crate) fn xcorr_forward<T: Real>(g: &XcorrGeometry, search: &[T], template: &[T]) -> Vec<T> {
    let (sh, sw, th, tw, oh, ow) = (g.search_h, g.search_w, g.template_h, g.template_w, g.out_h, g.out_w);
    let mut out = vec![T::zero(); g.channels * oh * ow];
    for c in 0..g.channels {
        let s_c = &search[c * sh * sw..(c + 1) * sh * sw];
        let t_c = &template[c * th * tw..(c + 1) * th * tw];
        let out_c = &mut out[c * oh * ow..(c + 1) * oh * ow];
        for u in 0..th {
            for v in 0..tw {
                let tv = t_c[u * tw + v];
                for i in 0..oh {
                    let s_row = &s_c[(i + u) * sw + v..(i + u) * sw + v + ow];
                    axpy(tv, s_row, &mut out_c[i * ow..(i + 1) * ow]);
                }
            }
        }
    }
    out
}

pub(crate) fn xcorr_backward<T: Real>(
    g: &XcorrGeometry,
    search: &[T],
    template: &[T],
    grad_out: &[T],
    mut grad_search: Option<&mut [T]>,
    mut grad_template: Option<&mut [T]>,
) {
    let (sh, sw, th, tw, oh, ow) = (g.search_h, g.search_w, g.template_h, g.template_w, g.out_h, g.out_w);
    for c in 0..g.channels {
        let s_off = c * sh * sw;
        let t_off = c * th * tw;
        let g_c = &grad_out[c * oh * ow..(c + 1) * oh * ow];
        for u in 0..th {
            for v in 0..tw {
                let tv = template[t_off + u * tw + v];
                let mut tacc = T::zero();
                for i in 0..oh {
                    let g_row = &g_c[i * ow..(i + 1) * ow];
                    let lo = s_off + (i + u) * sw + v;
                    if let Some(gs) = grad_search.as_deref_mut() {
                        axpy(tv, g_row, &mut gs[lo..lo + ow]);
                    }
                    if grad_template.is_some() {
                        tacc += dot(g_row, &search[lo..lo + ow]);
                    }
                }
                if let Some(gt) = grad_template.as_deref_mut() {
                    gt[t_off + u * tw + v] += tacc;
                }
            }
        }
    }
}
