//! Axis-aligned bounding boxes and overlap arithmetic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("degenerate box: width and height must be positive, got w={w}, h={h}")]
    DegenerateBox { w: f64, h: f64 },
    #[error("non-finite box coordinate")]
    NonFinite,
}

/// Axis-aligned bounding box in pixel coordinates, top-left origin.
///
/// Serialized as a `[x, y, w, h]` array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 4]", try_from = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(GeometryError::DegenerateBox { w, h });
        }
        Ok(Self { x, y, w, h })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    /// Smaller of width and height; the salience measure used by annotation floors.
    pub fn min_dimension(&self) -> f64 {
        self.w.min(self.h)
    }

    /// Clamp the box to `[0, width] x [0, height]` image bounds.
    ///
    /// Returns an error if nothing of the box remains inside the image.
    pub fn clamp_to(&self, width: f64, height: f64) -> Result<Self, GeometryError> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = self.right().min(width);
        let y1 = self.bottom().min(height);
        BBox::new(x0, y0, x1 - x0, y1 - y0)
    }

    /// Total ordering for canonical output sorting.
    pub fn cmp_coords(&self, other: &Self) -> std::cmp::Ordering {
        self.x
            .total_cmp(&other.x)
            .then(self.y.total_cmp(&other.y))
            .then(self.w.total_cmp(&other.w))
            .then(self.h.total_cmp(&other.h))
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = GeometryError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

/// Intersection-over-union of two boxes.
///
/// Both boxes must have positive area, which `BBox` guarantees by construction.
/// Identical boxes score exactly 1.0; the general formula may round a hair
/// below it.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    if a == b {
        return 1.0;
    }
    let x0 = a.x.max(b.x);
    let y0 = a.y.max(b.y);
    let x1 = a.right().min(b.right());
    let y1 = a.bottom().min(b.bottom());
    if x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let inter = (x1 - x0) * (y1 - y0);
    let union = a.area() + b.area() - inter;
    inter / union
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn iou_identical_boxes_is_one() {
        assert_eq!(iou(&bb(0.0, 0.0, 10.0, 10.0), &bb(0.0, 0.0, 10.0, 10.0)), 1.0);
    }

    #[test]
    fn iou_disjoint_boxes_is_zero() {
        assert_eq!(iou(&bb(0.0, 0.0, 10.0, 10.0), &bb(20.0, 20.0, 5.0, 5.0)), 0.0);
    }

    #[test]
    fn iou_partial_overlap() {
        // intersection 5x5 = 25, union 100 + 100 - 25 = 175
        let v = iou(&bb(0.0, 0.0, 10.0, 10.0), &bb(5.0, 5.0, 10.0, 10.0));
        assert!((v - 25.0 / 175.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_box_rejected() {
        assert!(matches!(
            BBox::new(0.0, 0.0, 0.0, 5.0),
            Err(GeometryError::DegenerateBox { .. })
        ));
        assert!(matches!(
            BBox::new(0.0, 0.0, 5.0, -1.0),
            Err(GeometryError::DegenerateBox { .. })
        ));
        assert!(matches!(BBox::new(f64::NAN, 0.0, 1.0, 1.0), Err(GeometryError::NonFinite)));
    }

    #[test]
    fn clamp_trims_overflow() {
        let b = bb(-5.0, 90.0, 20.0, 20.0).clamp_to(100.0, 100.0).unwrap();
        assert_eq!((b.x, b.y, b.w, b.h), (0.0, 90.0, 15.0, 10.0));
        // entirely outside -> nothing left
        assert!(bb(200.0, 200.0, 5.0, 5.0).clamp_to(100.0, 100.0).is_err());
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(
            ax in -50.0..50.0f64, ay in -50.0..50.0f64, aw in 0.1..40.0f64, ah in 0.1..40.0f64,
            bx in -50.0..50.0f64, by in -50.0..50.0f64, bw in 0.1..40.0f64, bh in 0.1..40.0f64,
        ) {
            let a = bb(ax, ay, aw, ah);
            let b = bb(bx, by, bw, bh);
            let ab = iou(&a, &b);
            let ba = iou(&b, &a);
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
        }
    }
}
