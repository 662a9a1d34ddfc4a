use std::collections::VecDeque;

use image::RgbImage;
use serde::Serialize;
use thiserror::Error;

use super::{estimate_light, LightDirection, LightError};
use crate::association::Point;
use crate::augment::{channel_means, relight_to, AugmentError};
use crate::mask::{mask_to_box, BBox, BitMask, MaskError};

#[derive(Debug, Error)]
pub enum EditError {
    #[error(
        "source light direction is undefined ({0}); check that the shadow and object masks are non-empty and apart"
    )]
    UndefinedLight(#[from] LightError),
    #[error("scale must be a positive finite number, got {0}")]
    Scale(f64),
    #[error("placement puts the whole object outside the destination image")]
    OutOfFrame,
    #[error("nothing to fill from: the mask covers the whole image")]
    NoKnownPixels,
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Relight(#[from] AugmentError),
}

/// Pixels to hand to an inpainting tool: shadow ∪ object, dilated by a
/// square of side `2·dilation + 1`.
pub fn removal_mask(shadow: &BitMask, object: &BitMask, dilation: u32) -> Result<BitMask, MaskError> {
    Ok(shadow.union(object)?.dilate(dilation))
}

/// Placeholder inpainting: every masked pixel takes the colour of the
/// nearest unmasked pixel in 4-connected steps, ties going to the earlier
/// pixel in row-major order.
pub fn fill_nearest(image: &RgbImage, mask: &BitMask) -> Result<RgbImage, EditError> {
    let (w, h) = (image.width(), image.height());
    if mask.dims() != (w, h) {
        return Err(MaskError::DimensionMismatch {
            left: mask.dims(),
            right: (w, h),
        }
        .into());
    }
    if mask.area() == mask.len() as u64 {
        return Err(EditError::NoKnownPixels);
    }
    let mut out = image.clone();
    let mut known: Vec<bool> = (0..mask.len()).map(|i| !mask.get_index(i)).collect();
    let mut queue: VecDeque<(u32, u32)> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .filter(|&(r, c)| known[(r * w + c) as usize])
        .collect();
    while let Some((r, c)) = queue.pop_front() {
        let px = *out.get_pixel(c, r);
        let steps: [(i64, i64); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        for (dr, dc) in steps {
            let (nr, nc) = (r as i64 + dr, c as i64 + dc);
            if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                continue;
            }
            let i = (nr as u32 * w + nc as u32) as usize;
            if !known[i] {
                known[i] = true;
                out.put_pixel(nc as u32, nr as u32, px);
                queue.push_back((nr as u32, nc as u32));
            }
        }
    }
    Ok(out)
}

pub struct TransferSource<'a> {
    pub image: &'a RgbImage,
    pub shadow: &'a BitMask,
    pub object: &'a BitMask,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Placement {
    /// Destination position of the source anchor.
    pub at: Point,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferOutput {
    pub image: RgbImage,
    pub shadow: BitMask,
    pub object: BitMask,
    pub anchor: Point,
    pub rotation_deg: f64,
    /// False when the transfer was a whole-pixel translation.
    pub resampled: bool,
}

/// Midpoint of the object's lowest row, restricted to the columns it shares
/// with the shadow box when there are any.
pub fn contact_anchor(object: &BBox, shadow: &BBox) -> Point {
    let bottom = object.y + object.h - 1.0;
    let (ox0, ox1) = (object.x, object.x + object.w - 1.0);
    let (x0, x1) = (ox0.max(shadow.x), ox1.min(shadow.x + shadow.w - 1.0));
    let mid = if x0 <= x1 { (x0 + x1) / 2.0 } else { (ox0 + ox1) / 2.0 };
    Point::new(mid, bottom)
}

fn warp(src: &BitMask, w: u32, h: u32, inverse: impl Fn(Point) -> Point) -> BitMask {
    BitMask::from_fn(w, h, |row, col| {
        let p = inverse(Point::new(col as f64, row as f64));
        let (pc, pr) = (p.x.round(), p.y.round());
        pc >= 0.0 && pr >= 0.0 && src.get_signed(pr as i64, pc as i64)
    })
}

fn rotate(v: Point, theta: f64) -> Point {
    let (s, c) = theta.sin_cos();
    Point::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Moves an object and its shadow into `dst`.
///
/// The object is scaled about the contact anchor and placed so the anchor
/// lands on `placement.at`. The shadow is additionally rotated about the
/// anchor by the signed angle from the source light direction to
/// `dst_light`. Resampling is nearest-pixel through the inverse map; with
/// no rotation and unit scale the masks are translated exactly. The
/// shadow is composited by relighting with the source shadow's colour,
/// then the object is drawn on top.
pub fn transfer_object(
    src: &TransferSource<'_>,
    dst: &RgbImage,
    dst_light: &LightDirection,
    placement: &Placement,
) -> Result<TransferOutput, EditError> {
    let s = placement.scale;
    if !(s > 0.0 && s.is_finite()) {
        return Err(EditError::Scale(s));
    }
    let object_box = mask_to_box(src.object).map_err(|_| LightError::DegenerateBox("object"))?;
    let shadow_box = mask_to_box(src.shadow).map_err(|_| LightError::DegenerateBox("shadow"))?;
    let src_light = estimate_light(&shadow_box, &object_box)?;
    let theta = src_light.angle_to(dst_light);
    let anchor = contact_anchor(&object_box, &shadow_box);
    let at = placement.at;
    let (w, h) = (dst.width(), dst.height());

    let exact = theta == 0.0 && s == 1.0;
    let (object, shadow, object_inverse): (BitMask, BitMask, Box<dyn Fn(Point) -> Point>) = if exact {
        let dx = (at.x - anchor.x).round();
        let dy = (at.y - anchor.y).round();
        let shift =
            |m: &BitMask| BitMask::from_fn(w, h, |r, c| m.get_signed(r as i64 - dy as i64, c as i64 - dx as i64));
        (
            shift(src.object),
            shift(src.shadow),
            Box::new(move |q: Point| Point::new(q.x - dx, q.y - dy)),
        )
    } else {
        let object_inverse = move |q: Point| anchor + Point::new((q.x - at.x) / s, (q.y - at.y) / s);
        let shadow_inverse = move |q: Point| {
            let v = rotate(Point::new((q.x - at.x) / s, (q.y - at.y) / s), -theta);
            anchor + v
        };
        (
            warp(src.object, w, h, object_inverse),
            warp(src.shadow, w, h, shadow_inverse),
            Box::new(object_inverse),
        )
    };
    if object.is_empty() {
        return Err(EditError::OutOfFrame);
    }
    let shadow = shadow.difference(&object)?;

    let mut image = if shadow.is_empty() {
        dst.clone()
    } else {
        relight_to(dst, &shadow, channel_means(src.image, src.shadow)?)?
    };
    for (row, col) in object.iter_set() {
        let p = object_inverse(Point::new(col as f64, row as f64));
        let (pc, pr) = (p.x.round() as u32, p.y.round() as u32);
        image.put_pixel(col, row, *src.image.get_pixel(pc, pr));
    }
    Ok(TransferOutput {
        image,
        shadow,
        object,
        anchor,
        rotation_deg: theta.to_degrees(),
        resampled: !exact,
    })
}
