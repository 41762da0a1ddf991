//! Axis-aligned boxes and crop transforms, in continuous pixel coordinates
//! (pixel `i` covers `[i, i+1)`).

use serde::{Deserialize, Serialize};

/// Center/size box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BBox { cx, cy, w, h }
    }

    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        BBox::new((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)
    }

    pub fn x0(&self) -> f64 {
        self.cx - self.w / 2.0
    }

    pub fn y0(&self) -> f64 {
        self.cy - self.h / 2.0
    }

    pub fn x1(&self) -> f64 {
        self.cx + self.w / 2.0
    }

    pub fn y1(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.w > 0.0 && self.h > 0.0) || !self.cx.is_finite() || !self.cy.is_finite()
    }

    pub fn center_distance(&self, other: &BBox) -> f64 {
        (self.cx - other.cx).hypot(self.cy - other.cy)
    }

    /// Intersection over union; 0 for disjoint or empty boxes.
    pub fn iou(&self, other: &BBox) -> f64 {
        let iw = (self.x1().min(other.x1()) - self.x0().max(other.x0())).max(0.0);
        let ih = (self.y1().min(other.y1()) - self.y0().max(other.y0())).max(0.0);
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            (inter / union).clamp(0.0, 1.0)
        }
    }

    /// Shrinks the box to fit the frame, keeps at least `min_size` per side,
    /// then shifts the center so the box lies inside `[0,width] x [0,height]`.
    pub fn clamp_to_frame(&self, width: f64, height: f64, min_size: f64) -> BBox {
        let w = if self.w.is_finite() { self.w.clamp(min_size, width) } else { min_size };
        let h = if self.h.is_finite() { self.h.clamp(min_size, height) } else { min_size };
        let cx = if self.cx.is_finite() { self.cx } else { width / 2.0 };
        let cy = if self.cy.is_finite() { self.cy } else { height / 2.0 };
        BBox::new(cx.clamp(w / 2.0, width - w / 2.0), cy.clamp(h / 2.0, height - h / 2.0), w, h)
    }
}

/// Maps crop pixels back to frame pixels: `frame = origin + crop / scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CropTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    /// Crop pixels per frame pixel.
    pub scale: f64,
}

impl CropTransform {
    pub fn to_frame(&self, b: &BBox) -> BBox {
        BBox::new(
            self.origin_x + b.cx / self.scale,
            self.origin_y + b.cy / self.scale,
            b.w / self.scale,
            b.h / self.scale,
        )
    }

    pub fn to_crop(&self, b: &BBox) -> BBox {
        BBox::new(
            (b.cx - self.origin_x) * self.scale,
            (b.cy - self.origin_y) * self.scale,
            b.w * self.scale,
            b.h * self.scale,
        )
    }
}
