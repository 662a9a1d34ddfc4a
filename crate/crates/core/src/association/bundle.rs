//! Detection bundle: the per-image candidate detections exported by a
//! model, before NMS and pairing.
//!
//! ```json
//! {
//!   "format": "soba-detections", "version": 1,
//!   "images": [{
//!     "image_id": 1, "width": 640, "height": 480,
//!     "detections": [{
//!       "id": 1, "category": "shadow", "center": [x, y], "offset": [dx, dy],
//!       "score": 0.93,
//!       "main_mask": {"width": 640, "height": 480, "counts": [..]},
//!       "associated_mask": {..},
//!       "main_scores": [..], "associated_scores": [..]
//!     }]
//!   }]
//! }
//! ```
//!
//! Masks are RLE of the binarized prediction. The optional `*_scores`
//! arrays carry the raw row-major soft values and take precedence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Point, RawDetection};
use crate::dataset::Category;
use crate::mask::{MaskError, RleMask, SoftMask};

pub const DETECTIONS_FORMAT: &str = "soba-detections";
const DETECTIONS_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DetectionBundleError {
    #[error("invalid detection bundle JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported bundle format {format:?} version {version}")]
    Unsupported { format: String, version: u32 },
    #[error("image {image_id}, detection {id}: {reason}")]
    Record { image_id: u64, id: u64, reason: String },
    #[error("image {image_id}, detection {id}: {source}")]
    Mask {
        image_id: u64,
        id: u64,
        #[source]
        source: MaskError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub id: u64,
    pub category: Category,
    pub center: Point,
    pub offset: Point,
    pub score: f64,
    pub main_mask: RleMask,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub associated_mask: Option<RleMask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub main_scores: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub associated_scores: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionImage {
    pub image_id: u64,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub detections: Vec<DetectionRecord>,
    /// Soft masks resolved at load time; not serialized.
    #[serde(skip)]
    resolved: Vec<RawDetection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionBundle {
    pub format: String,
    pub version: u32,
    #[serde(default)]
    pub images: Vec<DetectionImage>,
}

fn soft_from(
    rle: &RleMask,
    scores: Option<&Vec<f64>>,
    image_id: u64,
    id: u64,
) -> Result<SoftMask, DetectionBundleError> {
    let mask_err = |source| DetectionBundleError::Mask { image_id, id, source };
    let bits = rle.decode().map_err(mask_err)?;
    match scores {
        Some(values) => SoftMask::new(rle.width, rle.height, values.clone()).map_err(mask_err),
        None => Ok(SoftMask::from(&bits)),
    }
}

impl DetectionImage {
    pub fn new(image_id: u64, width: u32, height: u32, detections: Vec<DetectionRecord>) -> Self {
        Self {
            image_id,
            width,
            height,
            detections,
            resolved: Vec::new(),
        }
    }

    fn resolve(&mut self) -> Result<(), DetectionBundleError> {
        let mut out = Vec::with_capacity(self.detections.len());
        let mut ids = std::collections::BTreeSet::new();
        for d in &self.detections {
            let record = |reason: String| DetectionBundleError::Record {
                image_id: self.image_id,
                id: d.id,
                reason,
            };
            if !ids.insert(d.id) {
                return Err(record("duplicate detection id".into()));
            }
            if !d.score.is_finite() {
                return Err(record(format!("non-finite score {}", d.score)));
            }
            if !(d.center.x.is_finite() && d.center.y.is_finite() && d.offset.x.is_finite() && d.offset.y.is_finite()) {
                return Err(record("non-finite center or offset".into()));
            }
            if d.center.x < 0.0 || d.center.y < 0.0 || d.center.x > self.width as f64 || d.center.y > self.height as f64
            {
                return Err(record(format!(
                    "center {:?} outside the image",
                    <[f64; 2]>::from(d.center)
                )));
            }
            for m in std::iter::once(&d.main_mask).chain(d.associated_mask.as_ref()) {
                if (m.width, m.height) != (self.width, self.height) {
                    return Err(record(format!(
                        "mask is {}x{}, image is {}x{}",
                        m.width, m.height, self.width, self.height
                    )));
                }
            }
            let main_mask = soft_from(&d.main_mask, d.main_scores.as_ref(), self.image_id, d.id)?;
            let associated_mask = match &d.associated_mask {
                Some(rle) => Some(soft_from(rle, d.associated_scores.as_ref(), self.image_id, d.id)?),
                None => None,
            };
            out.push(RawDetection {
                id: d.id,
                image_id: self.image_id,
                category: d.category,
                center: d.center,
                offset: d.offset,
                score: d.score,
                main_mask,
                associated_mask,
            });
        }
        self.resolved = out;
        Ok(())
    }

    /// The detections with their soft masks.
    pub fn detections_raw(&self) -> Vec<RawDetection> {
        self.resolved.clone()
    }
}

impl DetectionBundle {
    pub fn new(mut images: Vec<DetectionImage>) -> Result<Self, DetectionBundleError> {
        for img in &mut images {
            img.resolve()?;
        }
        Ok(Self {
            format: DETECTIONS_FORMAT.into(),
            version: DETECTIONS_VERSION,
            images,
        })
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, DetectionBundleError> {
        let b: DetectionBundle = serde_json::from_slice(bytes)?;
        if b.format != DETECTIONS_FORMAT || b.version != DETECTIONS_VERSION {
            return Err(DetectionBundleError::Unsupported {
                format: b.format,
                version: b.version,
            });
        }
        Self::new(b.images)
    }

    pub fn to_json(&self) -> Vec<u8> {
        crate::io::to_json_pretty(self).expect("bundle serialization cannot fail")
    }
}

impl DetectionRecord {
    /// Record for a detection, binarizing its soft masks at `threshold` and
    /// keeping the raw values only when they are not already binary.
    pub fn from_raw(d: &RawDetection, threshold: f64) -> Self {
        let raw = |m: &SoftMask| {
            let binary = m.values().iter().all(|&v| v == 0.0 || v == 1.0);
            (!binary).then(|| m.values().to_vec())
        };
        Self {
            id: d.id,
            category: d.category,
            center: d.center,
            offset: d.offset,
            score: d.score,
            main_mask: RleMask::encode(&d.main_mask.binarize(threshold)),
            associated_mask: d
                .associated_mask
                .as_ref()
                .map(|m| RleMask::encode(&m.binarize(threshold))),
            main_scores: raw(&d.main_mask),
            associated_scores: d.associated_mask.as_ref().and_then(raw),
        }
    }
}
