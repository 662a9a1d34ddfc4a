//! From raw detections to paired shadow-object associations.
//!
//! Each detection carries its own center `L` and a learned offset `O`
//! toward its partner. With class vector `c` (object −1, shadow +1) the
//! partner center is `A = L + O·c`.

mod bundle;
mod nms;
mod pairing;

pub use bundle::{DetectionBundle, DetectionBundleError, DetectionImage, DetectionRecord, DETECTIONS_FORMAT};
pub use nms::mask_nms;
pub use pairing::{
    pair_bundle, pair_detections, pair_image, ImagePairing, PairConfig, PairStrategy, PairedAssociation,
};

use serde::{Deserialize, Serialize};

use crate::dataset::Category;
use crate::mask::{FloatGrid, SoftMask};

/// Image-plane point or vector in pixels, `x` right and `y` down.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Direction flag of the offset: −1 for objects (object → shadow), +1 for
/// shadows (shadow → object).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassVector(i8);

impl ClassVector {
    pub const OBJECT: ClassVector = ClassVector(-1);
    pub const SHADOW: ClassVector = ClassVector(1);

    pub fn value(self) -> f64 {
        self.0 as f64
    }

    pub fn flipped(self) -> Self {
        ClassVector(-self.0)
    }
}

impl From<Category> for ClassVector {
    fn from(c: Category) -> Self {
        match c {
            Category::Object => ClassVector::OBJECT,
            Category::Shadow => ClassVector::SHADOW,
        }
    }
}

/// `A = L + O·c`.
pub fn associated_location(center: Point, offset: Point, class: ClassVector) -> Point {
    let c = class.value();
    Point::new(center.x + offset.x * c, center.y + offset.y * c)
}

/// Geometric mean of the two member scores.
pub fn combined_score(shadow_score: f64, object_score: f64) -> f64 {
    (shadow_score * object_score).sqrt()
}

/// Two channels of pixel coordinates relative to `center`, each divided by
/// `max(width, height) - 1` (at least 1), so the far corner of a square
/// grid reads ±1.
pub fn relative_coordinate_map(center: Point, width: u32, height: u32) -> [FloatGrid; 2] {
    let norm = (width.max(height) as f64 - 1.0).max(1.0);
    [
        FloatGrid::from_fn(width, height, |_, col| (col as f64 - center.x) / norm),
        FloatGrid::from_fn(width, height, |row, _| (row as f64 - center.y) / norm),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawDetection {
    pub id: u64,
    pub image_id: u64,
    pub category: Category,
    pub center: Point,
    pub offset: Point,
    pub score: f64,
    pub main_mask: SoftMask,
    pub associated_mask: Option<SoftMask>,
}

impl RawDetection {
    pub fn class_vector(&self) -> ClassVector {
        self.category.into()
    }

    pub fn associated_location(&self) -> Point {
        associated_location(self.center, self.offset, self.class_vector())
    }
}
