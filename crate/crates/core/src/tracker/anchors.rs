use crate::geometry::BBox;

/// Anchor shapes laid over the correlation grid, in search-region pixels.
///
/// Candidate `j` is anchor shape `a` at grid cell `(gy, gx)` with
/// `j = (a * grid_h + gy) * grid_w + gx`, the flattening order of the head outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchorSet {
    pub shapes: Vec<(f64, f64)>,
    pub grid_h: usize,
    pub grid_w: usize,
    /// Search pixels between neighbouring grid cells.
    pub stride: f64,
    /// Search-pixel coordinate of grid cell 0.
    pub origin: f64,
}

/// Bound on `|dw|, |dh|` when decoding, i.e. sizes within `[e^-4, e^4]` of the anchor.
pub const LOG_SCALE_CLAMP: f64 = 4.0;

impl AnchorSet {
    pub fn len(&self) -> usize {
        self.shapes.len() * self.grid_h * self.grid_w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_center(&self, gy: usize, gx: usize) -> (f64, f64) {
        (self.origin + self.stride * gx as f64, self.origin + self.stride * gy as f64)
    }

    pub fn anchor(&self, j: usize) -> BBox {
        let cells = self.grid_h * self.grid_w;
        let a = j / cells;
        let gy = (j % cells) / self.grid_w;
        let gx = j % self.grid_w;
        let (cx, cy) = self.cell_center(gy, gx);
        let (w, h) = self.shapes[a];
        BBox::new(cx, cy, w, h)
    }

    pub fn iter(&self) -> impl Iterator<Item = BBox> + '_ {
        (0..self.len()).map(|j| self.anchor(j))
    }
}

/// Offsets `(dx, dy, dw, dh)` of `target` relative to `anchor`.
pub fn encode(target: &BBox, anchor: &BBox) -> [f64; 4] {
    [
        (target.cx - anchor.cx) / anchor.w,
        (target.cy - anchor.cy) / anchor.h,
        (target.w / anchor.w).ln(),
        (target.h / anchor.h).ln(),
    ]
}

pub fn decode(offsets: [f64; 4], anchor: &BBox) -> BBox {
    let clamp = |v: f64| {
        if v.is_nan() {
            0.0
        } else {
            v.clamp(-LOG_SCALE_CLAMP, LOG_SCALE_CLAMP)
        }
    };
    BBox::new(
        anchor.cx + offsets[0] * anchor.w,
        anchor.cy + offsets[1] * anchor.h,
        anchor.w * clamp(offsets[2]).exp(),
        anchor.h * clamp(offsets[3]).exp(),
    )
}
