//! Binary and soft instance masks, plus the pixel kernels shared by the
//! evaluator, the losses and the augmentation pipeline.

mod bitmask;
mod filter;
mod grid;
mod rle;

pub use bitmask::BitMask;
pub use filter::{distance_transform, laplacian, laplacian_signed, threshold_band, LAPLACIAN_CENTER, LAPLACIAN_SIZE};
pub use grid::{FloatGrid, SoftMask, BINARIZE_THRESHOLD};
pub use rle::{decode_coco_counts, RleMask};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaskError {
    #[error("mask dimensions {left:?} and {right:?} differ")]
    DimensionMismatch { left: (u32, u32), right: (u32, u32) },
    #[error("mask dimensions must be positive, got {width}x{height}")]
    ZeroDimension { width: u32, height: u32 },
    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("malformed RLE: {0}")]
    MalformedRle(String),
    #[error("empty mask: {0}")]
    EmptyMask(&'static str),
    #[error("soft mask value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("distance field has zero maximum")]
    DegenerateField,
    #[error("run length overflow")]
    Overflow,
}

/// Axis-aligned box, origin top-left, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Smallest box covering both.
    pub fn union(&self, other: &BBox) -> BBox {
        if self.area() == 0.0 {
            return *other;
        }
        if other.area() == 0.0 {
            return *self;
        }
        let x0 = self.x.min(other.x);
        let y0 = self.y.min(other.y);
        let x1 = (self.x + self.w).max(other.x + other.w);
        let y1 = (self.y + self.h).max(other.y + other.h);
        BBox::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.w > 0.0 && self.h > 0.0)
    }
}

/// Intersection over union of two masks; 0 when both are empty.
pub fn mask_iou(a: &BitMask, b: &BitMask) -> Result<f64, MaskError> {
    a.check_same_dims(b)?;
    let union = a.union_area(b);
    if union == 0 {
        return Ok(0.0);
    }
    Ok(a.intersection_area(b) as f64 / union as f64)
}

/// Intersection over union of two boxes; touching edges give 0.
pub fn box_iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let ih = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    inter / union
}

/// Tight bounds of the set pixels.
pub fn mask_to_box(m: &BitMask) -> Result<BBox, MaskError> {
    let mut rows = (u32::MAX, 0u32);
    let mut cols = (u32::MAX, 0u32);
    let mut any = false;
    for (r, c) in m.iter_set() {
        any = true;
        rows = (rows.0.min(r), rows.1.max(r));
        cols = (cols.0.min(c), cols.1.max(c));
    }
    if !any {
        return Err(MaskError::EmptyMask("cannot box an empty mask"));
    }
    Ok(BBox::new(
        cols.0 as f64,
        rows.0 as f64,
        (cols.1 - cols.0 + 1) as f64,
        (rows.1 - rows.0 + 1) as f64,
    ))
}

/// [`mask_to_box`] with the zero box for empty masks.
pub fn mask_to_box_or_zero(m: &BitMask) -> BBox {
    mask_to_box(m).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_iou_examples() {
        let a = BitMask::rect(8, 8, 0, 0, 4, 2);
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        let far = BitMask::rect(8, 8, 5, 5, 2, 2);
        assert_eq!(mask_iou(&a, &far).unwrap(), 0.0);
        let b = BitMask::rect(8, 8, 2, 0, 4, 2);
        // dense pixel-count oracle
        let (mut inter, mut uni) = (0, 0);
        for r in 0..8 {
            for c in 0..8 {
                let (x, y) = (a.get(r, c), b.get(r, c));
                inter += (x && y) as u32;
                uni += (x || y) as u32;
            }
        }
        assert_eq!((inter, uni), (4, 12));
        assert_eq!(mask_iou(&a, &b).unwrap(), 4.0 / 12.0);
        let e = BitMask::new(8, 8);
        assert_eq!(mask_iou(&e, &e).unwrap(), 0.0);
        assert!(mask_iou(&a, &BitMask::new(8, 9)).is_err());
    }

    #[test]
    fn box_iou_examples() {
        let a = BBox::new(0.0, 0.0, 2.0, 2.0);
        assert_eq!(box_iou(&a, &a), 1.0);
        assert_eq!(box_iou(&a, &BBox::new(2.0, 0.0, 2.0, 2.0)), 0.0);
        let b = BBox::new(1.0, 0.0, 2.0, 2.0);
        // rasterized: overlap column x=1 over two rows, union 6 cells
        let ra = BitMask::rect(4, 4, 0, 0, 2, 2);
        let rb = BitMask::rect(4, 4, 1, 0, 2, 2);
        let oracle = mask_iou(&ra, &rb).unwrap();
        assert_eq!(oracle, 2.0 / 6.0);
        assert!((box_iou(&a, &b) - oracle).abs() < 1e-15);
    }

    #[test]
    fn mask_to_box_examples() {
        let mut m = BitMask::new(8, 8);
        m.set(3, 5, true);
        assert_eq!(mask_to_box(&m).unwrap(), BBox::new(5.0, 3.0, 1.0, 1.0));
        assert_eq!(
            mask_to_box(&BitMask::full(7, 4)).unwrap(),
            BBox::new(0.0, 0.0, 7.0, 4.0)
        );
        let l = BitMask::from_fn(10, 10, |r, c| {
            (c == 2 && (1..8).contains(&r)) || (r == 7 && (2..6).contains(&c))
        });
        let (mut r0, mut r1, mut c0, mut c1) = (u32::MAX, 0, u32::MAX, 0);
        for r in 0..10 {
            for c in 0..10 {
                if l.get(r, c) {
                    r0 = r0.min(r);
                    r1 = r1.max(r);
                    c0 = c0.min(c);
                    c1 = c1.max(c);
                }
            }
        }
        let expected = BBox::new(c0 as f64, r0 as f64, (c1 - c0 + 1) as f64, (r1 - r0 + 1) as f64);
        assert_eq!(mask_to_box(&l).unwrap(), expected);
        assert!(mask_to_box(&BitMask::new(2, 2)).is_err());
    }
}
