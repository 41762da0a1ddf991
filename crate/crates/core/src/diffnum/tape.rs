//! Define-by-run reverse-mode tape.
//!
//! Every operator appends one node holding its forward value. `backward`
//! walks the nodes in exact reverse order and accumulates gradients
//! additively, so a value used twice receives both contributions.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::kernels::{self, ConvGeometry, XcorrGeometry};
use super::tensor::Tensor;

/// Denominator guard of [`Tape::cosine_similarity`].
pub const COSINE_GUARD: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T: Real> {
    Leaf,
    Conv2d { input: Var, kernel: Var, geom: ConvGeometry },
    Xcorr { search: Var, template: Var, geom: XcorrGeometry },
    BiasAdd { input: Var, bias: Var, inner: usize },
    Add(Var, Var),
    Sub(Var, Var),
    Affine { input: Var, scale: T },
    Relu(Var),
    MaxConst { input: Var, floor: T },
    Clamp { input: Var, lo: T, hi: T },
    Softmax { input: Var, axis: Layout },
    LogSoftmax { input: Var, axis: Layout },
    Sum(Var),
    WeightedSum { input: Var, weights: Vec<T> },
    SmoothL1 { input: Var, target: Vec<T>, weights: Vec<T>, beta: T },
    L2Norm(Var),
    Cosine { a: Var, b: Var, dot: T, norm_a: T, norm_b: T },
    Reshape(Var),
    Narrow { input: Var, axis: Layout, start: usize, len: usize },
    Stack(Vec<Var>),
}

/// Decomposition of a shape around one axis: `outer x axis x inner`.
#[derive(Clone, Copy, Debug)]
struct Layout {
    outer: usize,
    len: usize,
    inner: usize,
}

impl Layout {
    fn of(shape: &[usize], axis: usize) -> Self {
        Layout { outer: shape[..axis].iter().product(), len: shape[axis], inner: shape[axis + 1..].iter().product() }
    }
}

#[derive(Debug)]
struct Node<T: Real> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Ordered record of executed operations, one per loss evaluation.
#[derive(Debug)]
pub struct Tape<T: Real = f64> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
    backward_done: bool,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), grads: Vec::new(), backward_done: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        let mut value = value;
        value.clear_grad();
        self.nodes.push(Node { value, op, requires_grad });
        self.backward_done = false;
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Records a leaf that receives a gradient during `backward`.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Records a leaf treated as a constant.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Copies `var` into a fresh constant leaf; nothing flows back through it.
    pub fn detach(&mut self, var: Var) -> Var {
        let value = self.nodes[var.0].value.clone();
        self.constant(value)
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    /// Gradient of the last `backward` root with respect to `var`.
    pub fn grad(&self, var: Var) -> Option<&[T]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    /// The value of `var` with its gradient attached.
    pub fn tensor_with_grad(&self, var: Var) -> Tensor<T> {
        let mut t = self.nodes[var.0].value.clone();
        if let Some(g) = self.grad(var) {
            t.set_grad(g.to_vec()).expect("gradient shape tracks value shape");
        }
        t
    }

    // ---- operators -------------------------------------------------------

    /// Cross-correlation convolution of `[C_in,H,W]` with `[C_out,C_in,kH,kW]`.
    ///
    /// Output extent is `(H + 2*pad - kH) / stride + 1` rounded down; trailing
    /// rows and columns that do not fill a whole window are not visited.
    pub fn conv2d(&mut self, input: Var, kernel: Var, stride: usize, pad: usize) -> Result<Var> {
        let is = self.shape(input).to_vec();
        let ks = self.shape(kernel).to_vec();
        if is.len() != 3 {
            return Err(Error::shape("conv2d", "input rank", 3, is.len()));
        }
        if ks.len() != 4 {
            return Err(Error::shape("conv2d", "kernel rank", 4, ks.len()));
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("conv2d: stride must be >= 1".into()));
        }
        if ks[1] != is[0] {
            return Err(Error::shape("conv2d", "input channels", ks[1], is[0]));
        }
        let (ph, pw) = (is[1] + 2 * pad, is[2] + 2 * pad);
        if ks[2] > ph {
            return Err(Error::shape("conv2d", "kernel height", format!("<= {ph}"), ks[2]));
        }
        if ks[3] > pw {
            return Err(Error::shape("conv2d", "kernel width", format!("<= {pw}"), ks[3]));
        }
        let geom = ConvGeometry {
            in_channels: is[0],
            height: is[1],
            width: is[2],
            out_channels: ks[0],
            kernel_h: ks[2],
            kernel_w: ks[3],
            stride,
            pad,
            out_h: (ph - ks[2]) / stride + 1,
            out_w: (pw - ks[3]) / stride + 1,
        };
        let data = kernels::conv2d_forward(&geom, self.value(input).data(), self.value(kernel).data());
        let value = Tensor::new(&[geom.out_channels, geom.out_h, geom.out_w], data)?;
        let rg = self.needs(&[input, kernel]);
        Ok(self.push(value, Op::Conv2d { input, kernel, geom }, rg))
    }

    /// Per-channel sliding inner product of `template` over `search`.
    pub fn xcorr_depthwise(&mut self, search: Var, template: Var) -> Result<Var> {
        let ss = self.shape(search).to_vec();
        let ts = self.shape(template).to_vec();
        if ss.len() != 3 {
            return Err(Error::shape("xcorr_depthwise", "search rank", 3, ss.len()));
        }
        if ts.len() != 3 {
            return Err(Error::shape("xcorr_depthwise", "template rank", 3, ts.len()));
        }
        if ss[0] != ts[0] {
            return Err(Error::shape("xcorr_depthwise", "channels", ss[0], ts[0]));
        }
        if ts[1] > ss[1] {
            return Err(Error::shape("xcorr_depthwise", "template height", format!("<= {}", ss[1]), ts[1]));
        }
        if ts[2] > ss[2] {
            return Err(Error::shape("xcorr_depthwise", "template width", format!("<= {}", ss[2]), ts[2]));
        }
        let geom = XcorrGeometry {
            channels: ss[0],
            search_h: ss[1],
            search_w: ss[2],
            template_h: ts[1],
            template_w: ts[2],
            out_h: ss[1] - ts[1] + 1,
            out_w: ss[2] - ts[2] + 1,
        };
        let data = kernels::xcorr_forward(&geom, self.value(search).data(), self.value(template).data());
        let value = Tensor::new(&[geom.channels, geom.out_h, geom.out_w], data)?;
        let rg = self.needs(&[search, template]);
        Ok(self.push(value, Op::Xcorr { search, template, geom }, rg))
    }

    /// Adds `bias[c]` to every element of channel `c` (axis 0).
    pub fn bias_add(&mut self, input: Var, bias: Var) -> Result<Var> {
        let s = self.shape(input).to_vec();
        let bn = self.value(bias).numel();
        if s[0] != bn {
            return Err(Error::shape("bias_add", "channels", s[0], bn));
        }
        let inner: usize = s[1..].iter().product();
        let b = self.value(bias).data().to_vec();
        let mut out = self.value(input).clone();
        for (c, chunk) in out.data_mut().chunks_mut(inner).enumerate() {
            chunk.iter_mut().for_each(|v| *v += b[c]);
        }
        let rg = self.needs(&[input, bias]);
        Ok(self.push(out, Op::BiasAdd { input, bias, inner }, rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::shape(op, "shape", format!("{sa:?}"), format!("{sb:?}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x + y).collect();
        let value = Tensor::new(self.shape(a), data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x - y).collect();
        let value = Tensor::new(self.shape(a), data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, input: Var, scale: T, shift: T) -> Var {
        let value = self.value(input).map(|v| scale * v + shift);
        let rg = self.needs(&[input]);
        self.push(value, Op::Affine { input, scale }, rg)
    }

    pub fn scale(&mut self, input: Var, factor: T) -> Var {
        self.affine(input, factor, T::zero())
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let value = self.value(input).map(|v| v.max(T::zero()));
        let rg = self.needs(&[input]);
        self.push(value, Op::Relu(input), rg)
    }

    /// `max(x, floor)` elementwise; the constant branch has zero gradient.
    pub fn max_with_constant(&mut self, input: Var, floor: T) -> Var {
        let value = self.value(input).map(|v| if v > floor { v } else { floor });
        let rg = self.needs(&[input]);
        self.push(value, Op::MaxConst { input, floor }, rg)
    }

    /// Clamp into `[lo, hi]`; gradient passes where `lo <= x <= hi`.
    pub fn clamp(&mut self, input: Var, lo: T, hi: T) -> Var {
        let value = self.value(input).map(|v| v.max(lo).min(hi));
        let rg = self.needs(&[input]);
        self.push(value, Op::Clamp { input, lo, hi }, rg)
    }

    fn axis_layout(&self, op: &'static str, input: Var, axis: usize) -> Result<Layout> {
        let s = self.shape(input);
        if axis >= s.len() {
            return Err(Error::Axis { op, axis, rank: s.len() });
        }
        Ok(Layout::of(s, axis))
    }

    /// Softmax along `axis`, computed with max subtraction.
    pub fn softmax(&mut self, input: Var, axis: usize) -> Result<Var> {
        let layout = self.axis_layout("softmax", input, axis)?;
        let mut value = self.value(input).clone();
        for_each_lane(value.data_mut(), layout, |lane| {
            let m = lane.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            let mut z = T::zero();
            for v in lane.iter_mut() {
                *v = (*v - m).exp();
                z += *v;
            }
            for v in lane.iter_mut() {
                *v /= z;
            }
        });
        let rg = self.needs(&[input]);
        Ok(self.push(value, Op::Softmax { input, axis: layout }, rg))
    }

    pub fn log_softmax(&mut self, input: Var, axis: usize) -> Result<Var> {
        let layout = self.axis_layout("log_softmax", input, axis)?;
        let mut value = self.value(input).clone();
        for_each_lane(value.data_mut(), layout, |lane| {
            let m = lane.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            let lse = m + lane.iter().map(|&v| (v - m).exp()).sum::<T>().ln();
            for v in lane.iter_mut() {
                *v -= lse;
            }
        });
        let rg = self.needs(&[input]);
        Ok(self.push(value, Op::LogSoftmax { input, axis: layout }, rg))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let s: T = self.value(input).data().iter().copied().sum();
        let rg = self.needs(&[input]);
        self.push(Tensor::scalar(s), Op::Sum(input), rg)
    }

    /// `sum_i weights[i] * x[i]` with constant weights.
    pub fn weighted_sum(&mut self, input: Var, weights: Vec<T>) -> Result<Var> {
        let n = self.value(input).numel();
        if weights.len() != n {
            return Err(Error::shape("weighted_sum", "weights length", n, weights.len()));
        }
        let s: T = self.value(input).data().iter().zip(&weights).map(|(&x, &w)| x * w).sum();
        let rg = self.needs(&[input]);
        Ok(self.push(Tensor::scalar(s), Op::WeightedSum { input, weights }, rg))
    }

    /// `sum_i weights[i] * smooth_l1(x[i] - target[i])` with transition point `beta`.
    pub fn smooth_l1(&mut self, input: Var, target: Vec<T>, weights: Vec<T>, beta: T) -> Result<Var> {
        let n = self.value(input).numel();
        if target.len() != n {
            return Err(Error::shape("smooth_l1", "target length", n, target.len()));
        }
        if weights.len() != n {
            return Err(Error::shape("smooth_l1", "weights length", n, weights.len()));
        }
        let half = T::of(0.5);
        let s: T = self
            .value(input)
            .data()
            .iter()
            .zip(&target)
            .zip(&weights)
            .map(|((&x, &t), &w)| {
                let d = (x - t).abs();
                let l = if d < beta { half * d * d / beta } else { d - half * beta };
                w * l
            })
            .sum();
        let rg = self.needs(&[input]);
        Ok(self.push(Tensor::scalar(s), Op::SmoothL1 { input, target, weights, beta }, rg))
    }

    /// Euclidean norm of the flattened input; gradient 0 at the origin.
    pub fn l2_norm(&mut self, input: Var) -> Var {
        let n = self.value(input).data().iter().map(|&v| v * v).sum::<T>().sqrt();
        let rg = self.needs(&[input]);
        self.push(Tensor::scalar(n), Op::L2Norm(input), rg)
    }

    /// `<a,b> / (|a| |b| + 1e-12)` over the flattened inputs.
    ///
    /// When both norms are below the guard the result is 0 with zero gradient.
    pub fn cosine_similarity(&mut self, a: Var, b: Var) -> Result<Var> {
        let (na, nb) = (self.value(a).numel(), self.value(b).numel());
        if na != nb {
            return Err(Error::shape("cosine_similarity", "length", na, nb));
        }
        let (va, vb) = (self.value(a).data(), self.value(b).data());
        let dot: T = va.iter().zip(vb).map(|(&x, &y)| x * y).sum();
        let norm_a = va.iter().map(|&x| x * x).sum::<T>().sqrt();
        let norm_b = vb.iter().map(|&x| x * x).sum::<T>().sqrt();
        let guard = T::of(COSINE_GUARD);
        let c = if norm_a < guard && norm_b < guard { T::zero() } else { dot / (norm_a * norm_b + guard) };
        let rg = self.needs(&[a, b]);
        Ok(self.push(Tensor::scalar(c), Op::Cosine { a, b, dot, norm_a, norm_b }, rg))
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(input).clone().reshape(shape)?;
        let rg = self.needs(&[input]);
        Ok(self.push(value, Op::Reshape(input), rg))
    }

    /// Slice `[start, start+len)` along `axis`, keeping the rank.
    pub fn narrow(&mut self, input: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let layout = self.axis_layout("narrow", input, axis)?;
        if len == 0 || start + len > layout.len {
            return Err(Error::shape(
                "narrow",
                format!("axis {axis} range"),
                format!("within 0..{}", layout.len),
                format!("{start}..{}", start + len),
            ));
        }
        let src = self.value(input).data();
        let mut data = Vec::with_capacity(layout.outer * len * layout.inner);
        for o in 0..layout.outer {
            let base = (o * layout.len + start) * layout.inner;
            data.extend_from_slice(&src[base..base + len * layout.inner]);
        }
        let mut shape = self.shape(input).to_vec();
        shape[axis] = len;
        let value = Tensor::new(&shape, data)?;
        let rg = self.needs(&[input]);
        Ok(self.push(value, Op::Narrow { input, axis: layout, start, len }, rg))
    }

    /// Stacks equally shaped values along a new leading axis.
    pub fn stack(&mut self, inputs: &[Var]) -> Result<Var> {
        let first = *inputs.first().ok_or_else(|| Error::InvalidArgument("stack: no inputs".into()))?;
        let shape0 = self.shape(first).to_vec();
        let mut data = Vec::with_capacity(inputs.len() * self.value(first).numel());
        for &v in inputs {
            if self.shape(v) != shape0.as_slice() {
                return Err(Error::shape(
                    "stack",
                    "element shape",
                    format!("{shape0:?}"),
                    format!("{:?}", self.shape(v)),
                ));
            }
            data.extend_from_slice(self.value(v).data());
        }
        let mut shape = vec![inputs.len()];
        if !(shape0.len() == 1 && shape0[0] == 1) {
            shape.extend_from_slice(&shape0);
        }
        let value = Tensor::new(&shape, data)?;
        let rg = self.needs(inputs);
        Ok(self.push(value, Op::Stack(inputs.to_vec()), rg))
    }

    // ---- reverse pass ----------------------------------------------------

    /// Populates `grad` for every recorded value reachable from the scalar `root`.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::Backward("backward already ran on this tape; record a new forward pass first".into()));
        }
        if !self.value(root).is_scalar() {
            return Err(Error::Backward(format!("root must be a scalar, got shape {:?}", self.shape(root))));
        }
        self.grads = vec![None; self.nodes.len()];
        self.grads[root.0] = Some(vec![T::one()]);
        for idx in (0..=root.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = self.grads[idx].take() else { continue };
            self.propagate(idx, &g);
            self.grads[idx] = Some(g);
        }
        self.backward_done = true;
        Ok(())
    }

    fn grad_buf(&mut self, var: Var) -> Option<&mut Vec<T>> {
        if !self.nodes[var.0].requires_grad {
            return None;
        }
        let n = self.nodes[var.0].value.numel();
        Some(self.grads[var.0].get_or_insert_with(|| vec![T::zero(); n]))
    }

    fn accumulate(&mut self, var: Var, f: impl FnOnce(&mut [T])) {
        if let Some(buf) = self.grad_buf(var) {
            f(buf);
        }
    }

    fn propagate(&mut self, idx: usize, g: &[T]) {
        let op = self.nodes[idx].op.clone();
        match op {
            Op::Leaf => {}
            Op::Conv2d { input, kernel, geom } => {
                let mut gi = self.take_grad_buf(input);
                let mut gk = self.take_grad_buf(kernel);
                kernels::conv2d_backward(
                    &geom,
                    self.nodes[input.0].value.data(),
                    self.nodes[kernel.0].value.data(),
                    g,
                    gi.as_deref_mut(),
                    gk.as_deref_mut(),
                );
                self.restore(input, gi);
                self.restore(kernel, gk);
            }
            Op::Xcorr { search, template, geom } => {
                let mut gs = self.take_grad_buf(search);
                let mut gt = self.take_grad_buf(template);
                kernels::xcorr_backward(
                    &geom,
                    self.nodes[search.0].value.data(),
                    self.nodes[template.0].value.data(),
                    g,
                    gs.as_deref_mut(),
                    gt.as_deref_mut(),
                );
                self.restore(search, gs);
                self.restore(template, gt);
            }
            Op::BiasAdd { input, bias, inner } => {
                self.accumulate(input, |gi| add_into(gi, g));
                self.accumulate(bias, |gb| {
                    for (c, chunk) in g.chunks(inner).enumerate() {
                        gb[c] += chunk.iter().copied().sum::<T>();
                    }
                });
            }
            Op::Add(a, b) => {
                self.accumulate(a, |ga| add_into(ga, g));
                self.accumulate(b, |gb| add_into(gb, g));
            }
            Op::Sub(a, b) => {
                self.accumulate(a, |ga| add_into(ga, g));
                self.accumulate(b, |gb| gb.iter_mut().zip(g).for_each(|(x, &y)| *x -= y));
            }
            Op::Affine { input, scale } => {
                self.accumulate(input, |gi| gi.iter_mut().zip(g).for_each(|(x, &y)| *x += scale * y));
            }
            Op::Relu(input) => {
                let x = self.nodes[input.0].value.data().to_vec();
                self.accumulate(input, |gi| {
                    for ((d, &y), &xv) in gi.iter_mut().zip(g).zip(&x) {
                        if xv > T::zero() {
                            *d += y;
                        }
                    }
                });
            }
            Op::MaxConst { input, floor } => {
                let x = self.nodes[input.0].value.data().to_vec();
                self.accumulate(input, |gi| {
                    for ((d, &y), &xv) in gi.iter_mut().zip(g).zip(&x) {
                        if xv > floor {
                            *d += y;
                        }
                    }
                });
            }
            Op::Clamp { input, lo, hi } => {
                let x = self.nodes[input.0].value.data().to_vec();
                self.accumulate(input, |gi| {
                    for ((d, &y), &xv) in gi.iter_mut().zip(g).zip(&x) {
                        if xv >= lo && xv <= hi {
                            *d += y;
                        }
                    }
                });
            }
            Op::Softmax { input, axis } => {
                let p = self.nodes[idx].value.data().to_vec();
                self.accumulate(input, |gi| {
                    lanes(axis, |offsets| {
                        let s: T = offsets.clone().map(|k| g[k] * p[k]).sum();
                        for k in offsets {
                            gi[k] += p[k] * (g[k] - s);
                        }
                    })
                });
            }
            Op::LogSoftmax { input, axis } => {
                let lp = self.nodes[idx].value.data().to_vec();
                self.accumulate(input, |gi| {
                    lanes(axis, |offsets| {
                        let s: T = offsets.clone().map(|k| g[k]).sum();
                        for k in offsets {
                            gi[k] += g[k] - lp[k].exp() * s;
                        }
                    })
                });
            }
            Op::Sum(input) => {
                let gv = g[0];
                self.accumulate(input, |gi| gi.iter_mut().for_each(|x| *x += gv));
            }
            Op::WeightedSum { input, weights } => {
                let gv = g[0];
                self.accumulate(input, |gi| gi.iter_mut().zip(&weights).for_each(|(x, &w)| *x += gv * w));
            }
            Op::SmoothL1 { input, target, weights, beta } => {
                let gv = g[0];
                let x = self.nodes[input.0].value.data().to_vec();
                self.accumulate(input, |gi| {
                    for (((d, &xv), &t), &w) in gi.iter_mut().zip(&x).zip(&target).zip(&weights) {
                        let diff = xv - t;
                        let dl = if diff.abs() < beta { diff / beta } else { diff.sign0() };
                        *d += gv * w * dl;
                    }
                });
            }
            Op::L2Norm(input) => {
                let n = self.nodes[idx].value.item();
                if n > T::zero() {
                    let gv = g[0] / n;
                    let x = self.nodes[input.0].value.data().to_vec();
                    self.accumulate(input, |gi| gi.iter_mut().zip(&x).for_each(|(d, &xv)| *d += gv * xv));
                }
            }
            Op::Cosine { a, b, dot, norm_a, norm_b } => {
                let guard = T::of(COSINE_GUARD);
                if norm_a < guard && norm_b < guard {
                    return;
                }
                let den = norm_a * norm_b + guard;
                let gv = g[0];
                let va = self.nodes[a.0].value.data().to_vec();
                let vb = self.nodes[b.0].value.data().to_vec();
                // d/da = b/den - dot * norm_b * a / (norm_a * den^2)
                let coef = |n_self: T, n_other: T| {
                    if n_self > T::zero() {
                        dot * n_other / (n_self * den * den)
                    } else {
                        T::zero()
                    }
                };
                let (ca, cb) = (coef(norm_a, norm_b), coef(norm_b, norm_a));
                self.accumulate(a, |ga| {
                    for ((d, &x), &y) in ga.iter_mut().zip(&va).zip(&vb) {
                        *d += gv * (y / den - ca * x);
                    }
                });
                self.accumulate(b, |gb| {
                    for ((d, &y), &x) in gb.iter_mut().zip(&vb).zip(&va) {
                        *d += gv * (x / den - cb * y);
                    }
                });
            }
            Op::Reshape(input) => {
                self.accumulate(input, |gi| add_into(gi, g));
            }
            Op::Narrow { input, axis, start, len } => {
                self.accumulate(input, |gi| {
                    for o in 0..axis.outer {
                        let dst = (o * axis.len + start) * axis.inner;
                        let src = o * len * axis.inner;
                        add_into(&mut gi[dst..dst + len * axis.inner], &g[src..src + len * axis.inner]);
                    }
                });
            }
            Op::Stack(inputs) => {
                let chunk = g.len() / inputs.len();
                for (i, v) in inputs.into_iter().enumerate() {
                    self.accumulate(v, |gi| add_into(gi, &g[i * chunk..(i + 1) * chunk]));
                }
            }
        }
    }

    fn take_grad_buf(&mut self, var: Var) -> Option<Vec<T>> {
        self.grad_buf(var)?;
        self.grads[var.0].take()
    }

    /// Puts a taken buffer back, summing with anything written meanwhile
    /// (both operands of one op may be the same value).
    fn restore(&mut self, var: Var, buf: Option<Vec<T>>) {
        if let Some(b) = buf {
            match &mut self.grads[var.0] {
                Some(existing) => add_into(existing, &b),
                slot => *slot = Some(b),
            }
        }
    }
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    dst.iter_mut().zip(src).for_each(|(d, &s)| *d += s);
}

fn for_each_lane<T: Real>(data: &mut [T], layout: Layout, mut f: impl FnMut(&mut [T])) {
    let mut lane = vec![T::zero(); layout.len];
    for o in 0..layout.outer {
        for i in 0..layout.inner {
            let base = o * layout.len * layout.inner + i;
            for (k, v) in lane.iter_mut().enumerate() {
                *v = data[base + k * layout.inner];
            }
            f(&mut lane);
            for (k, v) in lane.iter().enumerate() {
                data[base + k * layout.inner] = *v;
            }
        }
    }
}

fn lanes(layout: Layout, mut f: impl FnMut(std::iter::StepBy<std::ops::Range<usize>>)) {
    for o in 0..layout.outer {
        for i in 0..layout.inner {
            let base = o * layout.len * layout.inner + i;
            f((base..base + layout.len * layout.inner).step_by(layout.inner));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec1(tape: &mut Tape<f64>, v: &[f64]) -> Var {
        tape.param(Tensor::new(&[v.len()], v.to_vec()).unwrap())
    }

    #[test]
    fn conv_of_ones_sums_window() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(&[1, 3, 3], 1.0));
        let k = tape.constant(Tensor::full(&[1, 1, 3, 3], 1.0));
        let y = tape.conv2d(x, k, 1, 0).unwrap();
        assert_eq!(tape.shape(y), &[1, 1, 1]);
        assert_eq!(tape.value(y).item(), 9.0);
    }

    #[test]
    fn identity_kernel_is_identity() {
        let mut tape = Tape::new();
        let input = Tensor::from_fn(&[1, 4, 5], |i| i as f64 * 0.25 - 1.0);
        let x = tape.constant(input.clone());
        let k = tape.constant(Tensor::full(&[1, 1, 1, 1], 1.0));
        let y = tape.conv2d(x, k, 1, 0).unwrap();
        assert_eq!(tape.value(y).data(), input.data());
    }

    #[test]
    fn conv_shape_errors_name_the_dimension() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::<f64>::zeros(&[2, 4, 4]));
        let k = tape.constant(Tensor::zeros(&[1, 3, 3, 3]));
        let err = tape.conv2d(x, k, 1, 0).unwrap_err().to_string();
        assert!(err.contains("input channels"), "{err}");
        let k = tape.constant(Tensor::zeros(&[1, 2, 5, 3]));
        let err = tape.conv2d(x, k, 1, 0).unwrap_err().to_string();
        assert!(err.contains("kernel height"), "{err}");
        let k = tape.constant(Tensor::zeros(&[1, 2, 3, 3]));
        assert!(tape.conv2d(x, k, 0, 0).is_err());
    }

    #[test]
    fn xcorr_of_equal_sizes_is_squared_norm() {
        let mut tape = Tape::new();
        let data: Vec<f64> = (0..18).map(|i| (i as f64 - 7.0) * 0.3).collect();
        let t = Tensor::new(&[2, 3, 3], data.clone()).unwrap();
        let (s, z) = (tape.constant(t.clone()), tape.constant(t));
        let y = tape.xcorr_depthwise(s, z).unwrap();
        assert_eq!(tape.shape(y), &[2, 1, 1]);
        for c in 0..2 {
            let sq: f64 = data[c * 9..(c + 1) * 9].iter().map(|v| v * v).sum();
            assert!((tape.value(y).data()[c] - sq).abs() < 1e-12);
        }
        let zero = tape.constant(Tensor::zeros(&[2, 2, 2]));
        let y = tape.xcorr_depthwise(s, zero).unwrap();
        assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
        let big = tape.constant(Tensor::zeros(&[2, 4, 3]));
        assert!(tape.xcorr_depthwise(s, big).is_err());
    }

    #[test]
    fn cosine_examples() {
        let mut tape = Tape::new();
        let a = vec1(&mut tape, &[1.0, 0.0]);
        let b = vec1(&mut tape, &[1.0, 1.0]);
        let c = tape.cosine_similarity(a, b).unwrap();
        assert!((tape.value(c).item() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        let o = vec1(&mut tape, &[0.0, 2.0]);
        let c = tape.cosine_similarity(a, o).unwrap();
        assert_eq!(tape.value(c).item(), 0.0);
        let same = tape.cosine_similarity(b, b).unwrap();
        assert!((tape.value(same).item() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_of_two_zero_vectors_is_zero_with_zero_gradient() {
        let mut tape = Tape::new();
        let a = vec1(&mut tape, &[0.0, 0.0, 0.0]);
        let b = vec1(&mut tape, &[0.0, 1e-14, 0.0]);
        let c = tape.cosine_similarity(a, b).unwrap();
        assert_eq!(tape.value(c).item(), 0.0);
        tape.backward(c).unwrap();
        assert!(tape.grad(a).unwrap_or(&[0.0]).iter().all(|&g| g == 0.0));
        assert!(tape.grad(b).unwrap_or(&[0.0]).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn elementwise_examples() {
        let mut tape = Tape::new();
        let x = vec1(&mut tape, &[-2.0, 3.0]);
        let r = tape.relu(x);
        assert_eq!(tape.value(r).data(), &[0.0, 3.0]);

        let z = vec1(&mut tape, &[0.0, 0.0]);
        let p = tape.softmax(z, 0).unwrap();
        assert_eq!(tape.value(p).data(), &[0.5, 0.5]);
        assert!(tape.softmax(z, 1).is_err());

        let m_in = vec1(&mut tape, &[-0.3, 0.8]);
        let m = tape.max_with_constant(m_in, 0.5);
        assert_eq!(tape.value(m).data(), &[0.5, 0.8]);
        let s = tape.sum(m);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(m_in).unwrap(), &[0.0, 1.0]);
    }

    #[test]
    fn backward_examples() {
        let mut tape = Tape::new();
        let x = vec1(&mut tape, &[1.0, -2.0, 0.5]);
        let s = tape.sum(x);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0, 1.0, 1.0]);

        // |x|^2 as the correlation of x with itself: both operands are x.
        let mut tape = Tape::new();
        let x = vec1(&mut tape, &[1.0, -2.0, 0.5]);
        let x3 = tape.reshape(x, &[1, 1, 3]).unwrap();
        let sq = tape.xcorr_depthwise(x3, x3).unwrap();
        let root = tape.sum(sq);
        assert_eq!(tape.value(root).item(), 5.25);
        tape.backward(root).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[2.0, -4.0, 1.0]);
    }

    #[test]
    fn backward_rules() {
        let mut tape = Tape::new();
        let x = vec1(&mut tape, &[1.0, 2.0]);
        assert!(tape.backward(x).is_err(), "non-scalar root");
        let s = tape.sum(x);
        tape.backward(s).unwrap();
        assert!(tape.backward(s).is_err(), "second backward without a new forward");
        let t = tape.scale(s, 3.0);
        tape.backward(t).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[3.0, 3.0]);
    }

    #[test]
    fn fan_out_accumulates_both_paths() {
        let mut tape = Tape::new();
        let x = vec1(&mut tape, &[1.5, -0.5]);
        let y = tape.add(x, x).unwrap();
        let z = tape.sub(y, x).unwrap();
        let s = tape.sum(z);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0, 1.0]);
    }

    #[test]
    fn detach_blocks_gradient() {
        let mut tape = Tape::new();
        let x = vec1(&mut tape, &[1.0, 2.0]);
        let d = tape.detach(x);
        let y = tape.add(x, d).unwrap();
        let s = tape.sum(y);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0, 1.0]);
        assert!(tape.grad(d).is_none());
    }
}
