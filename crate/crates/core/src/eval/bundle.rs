//! Prediction bundle file: the scored triples (and lone instances) that
//! the evaluator consumes.
//!
//! ```json
//! {
//!   "format": "soba-predictions", "version": 1,
//!   "strategy": "associated_mask", "binarize_threshold": 0.5,
//!   "associations": [{"id": 1, "image_id": 1, "score": 0.9,
//!                     "shadow": {"mask": {..rle..}, "bbox": [..]},
//!                     "object": {..}, "association": {..}}],
//!   "instances": [{"id": 1, "image_id": 1, "category": "shadow",
//!                  "score": 0.9, "mask": {..}, "bbox": [..]}]
//! }
//! ```
//!
//! When `instances` is empty the instance predictions are taken from the
//! shadows and objects of the triples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{PredictionTriple, Region};
use crate::dataset::{Category, Dataset};

pub const PREDICTIONS_FORMAT: &str = "soba-predictions";
const PREDICTIONS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedInstance {
    pub id: u64,
    pub image_id: u64,
    pub category: Category,
    pub score: f64,
    #[serde(flatten)]
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionBundle {
    pub format: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binarize_threshold: Option<f64>,
    #[serde(default)]
    pub associations: Vec<PredictionTriple>,
    #[serde(default)]
    pub instances: Vec<PredictedInstance>,
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("invalid prediction bundle JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported bundle format {format:?} version {version}")]
    Unsupported { format: String, version: u32 },
    #[error("prediction {id}: {reason}")]
    Record { id: u64, reason: String },
}

impl PredictionBundle {
    pub fn new(associations: Vec<PredictionTriple>, instances: Vec<PredictedInstance>) -> Self {
        Self {
            format: PREDICTIONS_FORMAT.into(),
            version: PREDICTIONS_VERSION,
            strategy: None,
            binarize_threshold: None,
            associations,
            instances,
        }
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, BundleError> {
        let b: PredictionBundle = serde_json::from_slice(bytes)?;
        if b.format != PREDICTIONS_FORMAT || b.version != PREDICTIONS_VERSION {
            return Err(BundleError::Unsupported {
                format: b.format,
                version: b.version,
            });
        }
        for t in &b.associations {
            let dims = t.shadow.mask.dims();
            if t.object.mask.dims() != dims || t.association.mask.dims() != dims {
                return Err(BundleError::Record {
                    id: t.id,
                    reason: "shadow, object and association masks differ in size".into(),
                });
            }
            if !t.score.is_finite() {
                return Err(BundleError::Record {
                    id: t.id,
                    reason: format!("non-finite score {}", t.score),
                });
            }
        }
        if let Some(p) = b.instances.iter().find(|p| !p.score.is_finite()) {
            return Err(BundleError::Record {
                id: p.id,
                reason: format!("non-finite score {}", p.score),
            });
        }
        Ok(b)
    }

    pub fn to_json(&self) -> Vec<u8> {
        crate::io::to_json_pretty(self).expect("bundle serialization cannot fail")
    }

    /// Shadow and object of every triple, scored like the triple.
    pub fn derived_instances(&self) -> Vec<PredictedInstance> {
        self.associations
            .iter()
            .flat_map(|t| {
                [(Category::Shadow, &t.shadow, 0), (Category::Object, &t.object, 1)].map(|(category, region, k)| {
                    PredictedInstance {
                        id: 2 * t.id + k,
                        image_id: t.image_id,
                        category,
                        score: t.score,
                        region: region.clone(),
                    }
                })
            })
            .collect()
    }
}

/// Ground truth presented as predictions with score 1.
pub fn replay_ground_truth(ds: &Dataset) -> PredictionBundle {
    let decode = |r: &crate::mask::RleMask| r.decode().expect("validated at load");
    let associations = ds
        .associations()
        .iter()
        .map(|a| {
            let (s, o) = ds.pair(a);
            PredictionTriple {
                id: a.id,
                image_id: a.image_id,
                score: 1.0,
                shadow: Region {
                    mask: decode(&s.mask),
                    bbox: s.bbox,
                },
                object: Region {
                    mask: decode(&o.mask),
                    bbox: o.bbox,
                },
                association: Region {
                    mask: decode(&a.mask),
                    bbox: a.bbox,
                },
            }
        })
        .collect();
    let instances = ds
        .instances()
        .iter()
        .map(|i| PredictedInstance {
            id: i.id,
            image_id: i.image_id,
            category: i.category,
            score: 1.0,
            region: Region {
                mask: decode(&i.mask),
                bbox: i.bbox,
            },
        })
        .collect();
    let mut b = PredictionBundle::new(associations, instances);
    b.strategy = Some("ground_truth".into());
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::test_support::synthetic;

    #[test]
    fn bundle_round_trip() {
        let b = replay_ground_truth(&synthetic(2));
        let back = PredictionBundle::from_slice(&b.to_json()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn rejects_wrong_format() {
        let err = PredictionBundle::from_slice(br#"{"format":"x","version":1}"#).unwrap_err();
        assert!(matches!(err, BundleError::Unsupported { .. }));
    }

    #[test]
    fn derived_instances_cover_both_members() {
        let b = replay_ground_truth(&synthetic(2));
        let d = b.derived_instances();
        assert_eq!(d.len(), 4);
        assert_eq!(d.iter().filter(|i| i.category == Category::Shadow).count(), 2);
    }
}
