use serde::{Deserialize, Serialize};

/// Axis-aligned box in pixel coordinates, origin top-left.
///
/// Coordinates are kept as `f64`; nothing here truncates to integer pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    /// Builds a box, rejecting non-finite coordinates and inverted corners.
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Option<Self> {
        let b = BBox { x1, y1, x2, y2 };
        b.is_valid().then_some(b)
    }

    /// Box from a normalized YOLO center/size tuple.
    pub fn from_normalized_xywh(xc: f64, yc: f64, w: f64, h: f64, image_w: f64, image_h: f64) -> Self {
        BBox {
            x1: (xc - w / 2.0) * image_w,
            y1: (yc - h / 2.0) * image_h,
            x2: (xc + w / 2.0) * image_w,
            y2: (yc + h / 2.0) * image_h,
        }
    }

    /// Inverse of [`BBox::from_normalized_xywh`].
    pub fn to_normalized_xywh(&self, image_w: f64, image_h: f64) -> [f64; 4] {
        [
            (self.x1 + self.x2) / 2.0 / image_w,
            (self.y1 + self.y2) / 2.0 / image_h,
            (self.x2 - self.x1) / image_w,
            (self.y2 - self.y1) / image_h,
        ]
    }

    pub fn is_valid(&self) -> bool {
        [self.x1, self.y1, self.x2, self.y2].iter().all(|v| v.is_finite())
            && self.x1 <= self.x2
            && self.y1 <= self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    /// Clips the box to `[0, w] x [0, h]`.
    pub fn clamp_to(&self, image_w: f64, image_h: f64) -> Self {
        BBox {
            x1: self.x1.clamp(0.0, image_w),
            y1: self.y1.clamp(0.0, image_h),
            x2: self.x2.clamp(0.0, image_w),
            y2: self.y2.clamp(0.0, image_h),
        }
    }

    /// Scales each axis independently.
    pub fn scale(&self, sx: f64, sy: f64) -> Self {
        BBox {
            x1: self.x1 * sx,
            y1: self.y1 * sy,
            x2: self.x2 * sx,
            y2: self.y2 * sy,
        }
    }
}

/// Intersection over union. Zero when the boxes are disjoint or the union
/// has no area (two degenerate boxes, even identical ones).
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 || !union.is_finite() {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}
