//! Applications built on shadow-object pairs: image-plane light direction
//! and shadow-aware editing.
//!
//! Light directions point from the shadow box center toward the object
//! box center, toward the light's azimuth in the image. Angles are in
//! degrees in `[0, 360)`, measured with `atan2(dy, dx)` in image
//! coordinates (x right, y down), so straight up is 270°.

mod edit;

pub use edit::{
    contact_anchor, fill_nearest, removal_mask, transfer_object, EditError, Placement, TransferOutput, TransferSource,
};

use serde::Serialize;
use thiserror::Error;

use crate::association::Point;
use crate::mask::BBox;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LightError {
    #[error("{0} box is degenerate")]
    DegenerateBox(&'static str),
    #[error("shadow and object boxes share a center; the direction is undefined")]
    CoincidentCenters,
    #[error("no pair with a defined direction")]
    NoDirections,
    #[error("directions cancel out; the mean direction is undefined")]
    Cancelled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LightDirection {
    /// Unit vector.
    pub direction: Point,
    pub angle_deg: f64,
}

impl LightDirection {
    pub fn from_vector(v: Point) -> Option<Self> {
        let n = v.x.hypot(v.y);
        if !(n > 0.0) || !n.is_finite() {
            return None;
        }
        let direction = Point::new(v.x / n, v.y / n);
        Some(Self {
            direction,
            angle_deg: normalize_degrees(direction.y.atan2(direction.x).to_degrees()),
        })
    }

    /// Signed angle in radians that rotates `self` onto `other`.
    pub fn angle_to(&self, other: &LightDirection) -> f64 {
        let (a, b) = (self.direction, other.direction);
        (a.x * b.y - a.y * b.x).atan2(a.x * b.x + a.y * b.y)
    }
}

fn normalize_degrees(d: f64) -> f64 {
    let r = d.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

fn box_center(b: &BBox) -> Point {
    let (x, y) = b.center();
    Point::new(x, y)
}

/// Direction from the shadow box center toward the object box center.
pub fn estimate_light(shadow: &BBox, object: &BBox) -> Result<LightDirection, LightError> {
    if shadow.is_degenerate() {
        return Err(LightError::DegenerateBox("shadow"));
    }
    if object.is_degenerate() {
        return Err(LightError::DegenerateBox("object"));
    }
    LightDirection::from_vector(box_center(object) - box_center(shadow)).ok_or(LightError::CoincidentCenters)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LightAggregate {
    pub direction: Point,
    pub angle_deg: f64,
    /// `sqrt(−2 ln R)` in degrees, `R` the mean resultant length.
    pub circular_std_deg: f64,
    pub resultant_length: f64,
    pub count: usize,
}

/// Circular mean of unit directions.
pub fn aggregate_light(dirs: &[LightDirection]) -> Result<LightAggregate, LightError> {
    if dirs.is_empty() {
        return Err(LightError::NoDirections);
    }
    let n = dirs.len() as f64;
    let (sx, sy) = dirs
        .iter()
        .fold((0.0, 0.0), |(x, y), d| (x + d.direction.x, y + d.direction.y));
    let r = (sx.hypot(sy) / n).min(1.0);
    if r < 1e-12 {
        return Err(LightError::Cancelled);
    }
    let mean = LightDirection::from_vector(Point::new(sx, sy)).ok_or(LightError::Cancelled)?;
    Ok(LightAggregate {
        direction: mean.direction,
        angle_deg: mean.angle_deg,
        circular_std_deg: (-2.0 * r.ln()).max(0.0).sqrt().to_degrees(),
        resultant_length: r,
        count: dirs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairLight {
    pub association_id: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub light: Option<LightDirection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageLight {
    pub image_id: u64,
    pub pairs: Vec<PairLight>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<LightAggregate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate_error: Option<String>,
}

/// Per-pair directions for `(association id, shadow box, object box)` and
/// their aggregate; pairs without a direction are reported and skipped.
pub fn image_light(image_id: u64, pairs: impl IntoIterator<Item = (u64, BBox, BBox)>) -> ImageLight {
    let pairs: Vec<PairLight> = pairs
        .into_iter()
        .map(|(id, s, o)| match estimate_light(&s, &o) {
            Ok(l) => PairLight {
                association_id: id,
                light: Some(l),
                error: None,
            },
            Err(e) => PairLight {
                association_id: id,
                light: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let dirs: Vec<LightDirection> = pairs.iter().filter_map(|p| p.light).collect();
    let (aggregate, aggregate_error) = match aggregate_light(&dirs) {
        Ok(a) => (Some(a), None),
        Err(e) => (None, Some(e.to_string())),
    };
    ImageLight {
        image_id,
        pairs,
        aggregate,
        aggregate_error,
    }
}
