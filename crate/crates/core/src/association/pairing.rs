use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{combined_score, mask_nms, DetectionBundle, RawDetection};
use crate::dataset::Category;
use crate::eval::{PredictedInstance, PredictionBundle, PredictionTriple, Region};
use crate::mask::{mask_iou, BitMask, BINARIZE_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStrategy {
    /// Match each detection's associated mask to the opposite-category main
    /// masks by IoU; output both partners' main masks.
    #[default]
    AssociatedMask,
    /// Match by distance between the associated location and partner centers.
    OffsetPairing,
    /// Each detection's main mask with its own associated mask.
    MainPlusAssociated,
}

impl PairStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            PairStrategy::AssociatedMask => "associated_mask",
            PairStrategy::OffsetPairing => "offset_pairing",
            PairStrategy::MainPlusAssociated => "main_plus_associated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairConfig {
    pub strategy: PairStrategy,
    /// Detections scoring below this are dropped before NMS.
    pub score_threshold: f64,
    pub nms_threshold: f64,
    pub binarize_threshold: f64,
    /// Offset pairing accepts partners within this fraction of the longer
    /// image side.
    pub offset_radius: f64,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self {
            strategy: PairStrategy::AssociatedMask,
            score_threshold: 0.3,
            nms_threshold: 0.5,
            binarize_threshold: BINARIZE_THRESHOLD,
            offset_radius: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedAssociation {
    /// For `MainPlusAssociated` both ids name the single source detection.
    pub shadow_id: u64,
    pub object_id: u64,
    pub score: f64,
    pub shadow: BitMask,
    pub object: BitMask,
    pub association: BitMask,
}

impl PairedAssociation {
    fn new(shadow_id: u64, object_id: u64, score: f64, shadow: BitMask, object: BitMask) -> Self {
        let association = shadow.union(&object).expect("detections share image dimensions");
        Self {
            shadow_id,
            object_id,
            score,
            shadow,
            object,
            association,
        }
    }
}

fn by_score_then_id(dets: &[RawDetection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(dets[a].id.cmp(&dets[b].id))
    });
    order
}

/// Lowest id wins ties so the result does not depend on input order.
fn better(key: f64, id: u64, best: Option<(f64, u64, usize)>, lower_is_better: bool) -> bool {
    match best {
        None => true,
        Some((k, bid, _)) => {
            let improves = if lower_is_better { key < k } else { key > k };
            improves || (key == k && id < bid)
        }
    }
}

/// Pairs detections that have already been score-filtered and NMS'd.
pub fn pair_detections(dets: &[RawDetection], cfg: &PairConfig) -> Vec<PairedAssociation> {
    if dets.is_empty() {
        return Vec::new();
    }
    let t = cfg.binarize_threshold;
    let main: Vec<BitMask> = dets.iter().map(|d| d.main_mask.binarize(t)).collect();
    let assoc: Vec<Option<BitMask>> = dets
        .iter()
        .map(|d| d.associated_mask.as_ref().map(|m| m.binarize(t)))
        .collect();

    let mut pairs: Vec<PairedAssociation> = match cfg.strategy {
        PairStrategy::AssociatedMask | PairStrategy::OffsetPairing => {
            let (w, h) = dets[0].main_mask.dims();
            let radius = cfg.offset_radius * w.max(h) as f64;
            let mut found: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for (i, d) in dets.iter().enumerate() {
                let mut best: Option<(f64, u64, usize)> = None;
                for (j, other) in dets.iter().enumerate() {
                    if other.category == d.category {
                        continue;
                    }
                    match cfg.strategy {
                        PairStrategy::AssociatedMask => {
                            let Some(a) = &assoc[i] else { break };
                            let iou = mask_iou(a, &main[j]).unwrap_or(0.0);
                            if iou > 0.0 && better(iou, other.id, best, false) {
                                best = Some((iou, other.id, j));
                            }
                        }
                        _ => {
                            let dist = d.associated_location().distance(&other.center);
                            if dist <= radius && better(dist, other.id, best, true) {
                                best = Some((dist, other.id, j));
                            }
                        }
                    }
                }
                if let Some((_, _, j)) = best {
                    let (s, o) = if d.category == Category::Shadow { (i, j) } else { (j, i) };
                    let score = combined_score(dets[s].score, dets[o].score);
                    let slot = found.entry((s, o)).or_insert(score);
                    *slot = slot.max(score);
                }
            }
            found
                .into_iter()
                .map(|((s, o), score)| {
                    PairedAssociation::new(dets[s].id, dets[o].id, score, main[s].clone(), main[o].clone())
                })
                .collect()
        }
        PairStrategy::MainPlusAssociated => {
            // A pair and its mirror image (found from both members) collapse
            // by triple-level NMS: both member IoUs at or above the NMS cut.
            let mut kept: Vec<PairedAssociation> = Vec::new();
            for i in by_score_then_id(dets) {
                let Some(partner) = assoc[i].clone() else { continue };
                if partner.is_empty() || main[i].is_empty() {
                    continue;
                }
                let d = &dets[i];
                let (shadow, object) = match d.category {
                    Category::Shadow => (main[i].clone(), partner),
                    Category::Object => (partner, main[i].clone()),
                };
                let duplicate = kept.iter().any(|k| {
                    mask_iou(&k.shadow, &shadow).unwrap_or(0.0) >= cfg.nms_threshold
                        && mask_iou(&k.object, &object).unwrap_or(0.0) >= cfg.nms_threshold
                });
                if !duplicate {
                    kept.push(PairedAssociation::new(d.id, d.id, d.score, shadow, object));
                }
            }
            kept
        }
    };
    pairs.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then((a.shadow_id, a.object_id).cmp(&(b.shadow_id, b.object_id)))
    });
    pairs
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImagePairing {
    pub pairs: Vec<PairedAssociation>,
    /// Ids of every detection that survived filtering, paired or not.
    pub survivors: Vec<u64>,
}

/// Score filter, mask NMS, then pairing for the detections of one image.
pub fn pair_image(dets: &[RawDetection], cfg: &PairConfig) -> ImagePairing {
    let filtered: Vec<RawDetection> = dets
        .iter()
        .filter(|d| d.score >= cfg.score_threshold)
        .cloned()
        .collect();
    let keep = mask_nms(&filtered, cfg.nms_threshold, cfg.binarize_threshold);
    let survivors: Vec<RawDetection> = keep.into_iter().map(|i| filtered[i].clone()).collect();
    ImagePairing {
        pairs: pair_detections(&survivors, cfg),
        survivors: survivors.iter().map(|d| d.id).collect(),
    }
}

/// Runs [`pair_image`] over every image of a bundle and emits a prediction
/// bundle. Triples are numbered from 1 in image order.
pub fn pair_bundle(bundle: &DetectionBundle, cfg: &PairConfig) -> PredictionBundle {
    let per_image: Vec<(Vec<RawDetection>, ImagePairing)> = bundle
        .images
        .par_iter()
        .map(|img| {
            let dets = img.detections_raw();
            let pairing = pair_image(&dets, cfg);
            (dets, pairing)
        })
        .collect();

    let mut triples = Vec::new();
    let mut instances = Vec::new();
    for (img, (dets, pairing)) in bundle.images.iter().zip(per_image) {
        for p in pairing.pairs {
            let id = triples.len() as u64 + 1;
            let mut t = PredictionTriple::from_masks(id, img.image_id, p.shadow, p.object, p.score)
                .expect("same image dimensions");
            t.association.mask = p.association;
            triples.push(t);
        }
        for d in dets.iter().filter(|d| pairing.survivors.contains(&d.id)) {
            instances.push(PredictedInstance {
                id: d.id,
                image_id: img.image_id,
                category: d.category,
                score: d.score,
                region: Region::from_mask(d.main_mask.binarize(cfg.binarize_threshold)),
            });
        }
    }
    let mut out = PredictionBundle::new(triples, instances);
    out.strategy = Some(cfg.strategy.as_str().into());
    out.binarize_threshold = Some(cfg.binarize_threshold);
    out
}
