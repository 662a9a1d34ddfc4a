//! Shadow-object average precision (SOAP) and the companion association
//! and instance APs.
//!
//! A predicted triple is a true positive at threshold τ only when its
//! shadow, object and association all reach IoU ≥ τ against the same
//! unmatched ground-truth pair. Matching is greedy in descending score;
//! among qualifying ground truths the one with the highest association IoU
//! is taken. AP uses the COCO 101-point interpolation.

mod ap;
mod bundle;

pub use ap::{average_precision, pr_curve, rank_order, PrCurve, ScoredLabel, RECALL_POINTS};
pub use bundle::{replay_ground_truth, BundleError, PredictedInstance, PredictionBundle, PREDICTIONS_FORMAT};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Category, Dataset};
use crate::mask::{box_iou, mask_iou, mask_to_box_or_zero, BBox, BitMask, MaskError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction {id} references unknown image {image_id}")]
    UnknownImage { id: u64, image_id: u64 },
    #[error("prediction {id}: {source}")]
    Mask {
        id: u64,
        #[source]
        source: MaskError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IouMode {
    Segm,
    Bbox,
}

/// A mask with its box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub mask: BitMask,
    pub bbox: BBox,
}

impl Region {
    pub fn from_mask(mask: BitMask) -> Self {
        let bbox = mask_to_box_or_zero(&mask);
        Self { mask, bbox }
    }

    pub fn iou(&self, other: &Region, mode: IouMode) -> Result<f64, MaskError> {
        match mode {
            IouMode::Segm => mask_iou(&self.mask, &other.mask),
            IouMode::Bbox => {
                self.mask.check_same_dims(&other.mask)?;
                Ok(box_iou(&self.bbox, &other.bbox))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTriple {
    pub id: u64,
    pub image_id: u64,
    pub score: f64,
    pub shadow: Region,
    pub object: Region,
    pub association: Region,
}

impl PredictionTriple {
    /// Builds a triple whose association is the shadow ∪ object union
    /// (and the union box).
    pub fn from_masks(id: u64, image_id: u64, shadow: BitMask, object: BitMask, score: f64) -> Result<Self, MaskError> {
        let union = shadow.union(&object)?;
        let shadow = Region::from_mask(shadow);
        let object = Region::from_mask(object);
        let association = Region {
            bbox: shadow.bbox.union(&object.bbox),
            mask: union,
        };
        Ok(Self {
            id,
            image_id,
            score,
            shadow,
            object,
            association,
        })
    }
}

/// Ground-truth pair, decoded.
#[derive(Debug, Clone, PartialEq)]
pub struct GtTriple {
    pub association_id: u64,
    pub shadow: Region,
    pub object: Region,
    pub association: Region,
}

/// The three IoUs of a prediction against a ground-truth pair.
pub fn triple_ious(pred: &PredictionTriple, gt: &GtTriple, mode: IouMode) -> Result<[f64; 3], MaskError> {
    Ok([
        pred.shadow.iou(&gt.shadow, mode)?,
        pred.object.iou(&gt.object, mode)?,
        pred.association.iou(&gt.association, mode)?,
    ])
}

/// Shadow, object and association IoUs all `>= tau` ("no less than").
pub fn is_true_positive(pred: &PredictionTriple, gt: &GtTriple, tau: f64, mode: IouMode) -> Result<bool, MaskError> {
    Ok(triple_ious(pred, gt, mode)?.iter().all(|&iou| iou >= tau))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    /// Indexed like the input predictions.
    pub true_positive: Vec<bool>,
    /// Matched prediction index per ground truth.
    pub gt_match: Vec<Option<usize>>,
}

fn score_order<T>(items: &[T], key: impl Fn(&T) -> (f64, u64)) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, ia) = key(&items[a]);
        let (sb, ib) = key(&items[b]);
        sb.partial_cmp(&sa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(ia.cmp(&ib))
    });
    order
}

/// Greedy matching over a precomputed qualification table. `qualifies(p, g)`
/// returns the tie-break key (higher is better) when prediction `p` may be
/// matched to ground truth `g`.
fn greedy(order: &[usize], n_pred: usize, n_gt: usize, qualifies: impl Fn(usize, usize) -> Option<f64>) -> MatchResult {
    let mut tp = vec![false; n_pred];
    let mut gt_match = vec![None; n_gt];
    for &p in order {
        let mut best: Option<(usize, f64)> = None;
        for (g, matched) in gt_match.iter().enumerate() {
            if matched.is_some() {
                continue;
            }
            if let Some(key) = qualifies(p, g) {
                if best.is_none_or(|(_, k)| key > k) {
                    best = Some((g, key));
                }
            }
        }
        if let Some((g, _)) = best {
            gt_match[g] = Some(p);
            tp[p] = true;
        }
    }
    MatchResult {
        true_positive: tp,
        gt_match,
    }
}

/// SOAP matching of one image's predictions against its ground truth.
pub fn match_predictions(
    preds: &[PredictionTriple],
    gts: &[GtTriple],
    tau: f64,
    mode: IouMode,
) -> Result<MatchResult, MaskError> {
    let table = triple_table(preds, gts, mode)?;
    let order = score_order(preds, |p| (p.score, p.id));
    Ok(greedy(&order, preds.len(), gts.len(), |p, g| {
        soap_key(&table[p][g], tau)
    }))
}

fn triple_table(preds: &[PredictionTriple], gts: &[GtTriple], mode: IouMode) -> Result<Vec<Vec<[f64; 3]>>, MaskError> {
    preds
        .iter()
        .map(|p| gts.iter().map(|g| triple_ious(p, g, mode)).collect())
        .collect()
}

fn soap_key(ious: &[f64; 3], tau: f64) -> Option<f64> {
    ious.iter().all(|&v| v >= tau).then_some(ious[2])
}

fn single_key(iou: f64, tau: f64) -> Option<f64> {
    (iou >= tau).then_some(iou)
}

/// τ ∈ {0.50, 0.55, …, 0.95}.
pub fn soap_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub tau: f64,
    pub soap: Option<PrCurve>,
    pub association_ap: Option<f64>,
    pub shadow_ap: Option<f64>,
    pub object_ap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSet {
    pub soap: Option<f64>,
    pub soap50: Option<f64>,
    pub soap75: Option<f64>,
    pub association_ap: Option<f64>,
    pub instance_ap: Option<f64>,
    pub shadow_ap: Option<f64>,
    pub object_ap: Option<f64>,
    pub per_threshold: Vec<ThresholdResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    /// Always `"coco-101"`.
    pub ap_convention: &'static str,
    pub thresholds: Vec<f64>,
    pub image_count: usize,
    pub gt_pairs: usize,
    pub predicted_pairs: usize,
    pub segm: Option<MetricSet>,
    pub bbox: Option<MetricSet>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalModes {
    Segm,
    Bbox,
    Both,
}

impl EvalModes {
    fn list(self) -> Vec<IouMode> {
        match self {
            EvalModes::Segm => vec![IouMode::Segm],
            EvalModes::Bbox => vec![IouMode::Bbox],
            EvalModes::Both => vec![IouMode::Segm, IouMode::Bbox],
        }
    }
}

struct GtInstance {
    category: Category,
    region: Region,
}

struct ImageGt {
    triples: Vec<GtTriple>,
    instances: Vec<GtInstance>,
}

fn decode_region(rle: &crate::mask::RleMask, bbox: BBox) -> Region {
    Region {
        mask: rle.decode().expect("dataset masks are validated at load"),
        bbox,
    }
}

fn image_gt(ds: &Dataset, image_id: u64) -> ImageGt {
    let triples = ds
        .associations_in(image_id)
        .map(|a| {
            let (s, o) = ds.pair(a);
            GtTriple {
                association_id: a.id,
                shadow: decode_region(&s.mask, s.bbox),
                object: decode_region(&o.mask, o.bbox),
                association: decode_region(&a.mask, a.bbox),
            }
        })
        .collect();
    let instances = ds
        .instances_in(image_id)
        .map(|i| GtInstance {
            category: i.category,
            region: decode_region(&i.mask, i.bbox),
        })
        .collect();
    ImageGt { triples, instances }
}

/// IoU tables for one image and one mode, reused across thresholds.
struct ImageTables {
    triple_order: Vec<usize>,
    triples: Vec<Vec<[f64; 3]>>,
    /// Per category: prediction order, prediction indices, gt indices, IoUs.
    instances: [InstanceTable; 2],
    triple_labels: Vec<(f64, u64)>,
    gt_pairs: usize,
}

struct InstanceTable {
    order: Vec<usize>,
    labels: Vec<(f64, u64)>,
    gt_count: usize,
    ious: Vec<Vec<f64>>,
}

fn category_slot(c: Category) -> usize {
    match c {
        Category::Shadow => 0,
        Category::Object => 1,
    }
}

fn build_tables(
    preds: &[&PredictionTriple],
    inst_preds: &[&PredictedInstance],
    gt: &ImageGt,
    mode: IouMode,
) -> Result<ImageTables, EvalError> {
    let triples = preds
        .iter()
        .map(|p| {
            gt.triples
                .iter()
                .map(|g| triple_ious(p, g, mode))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|source| EvalError::Mask { id: p.id, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let triple_order = score_order(preds, |p| (p.score, p.id));
    let triple_labels = preds.iter().map(|p| (p.score, p.id)).collect();

    let mut instances = [Category::Shadow, Category::Object].map(|_| InstanceTable {
        order: vec![],
        labels: vec![],
        gt_count: 0,
        ious: vec![],
    });
    for cat in [Category::Shadow, Category::Object] {
        let ps: Vec<&&PredictedInstance> = inst_preds.iter().filter(|p| p.category == cat).collect();
        let gs: Vec<&GtInstance> = gt.instances.iter().filter(|g| g.category == cat).collect();
        let ious = ps
            .iter()
            .map(|p| {
                gs.iter()
                    .map(|g| p.region.iou(&g.region, mode))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|source| EvalError::Mask { id: p.id, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        instances[category_slot(cat)] = InstanceTable {
            order: score_order(&ps, |p| (p.score, p.id)),
            labels: ps.iter().map(|p| (p.score, p.id)).collect(),
            gt_count: gs.len(),
            ious,
        };
    }
    Ok(ImageTables {
        triple_order,
        triples,
        instances,
        triple_labels,
        gt_pairs: gt.triples.len(),
    })
}

fn labels_from(image_id: u64, labels: &[(f64, u64)], result: &MatchResult, out: &mut Vec<ScoredLabel>) {
    for (i, &(score, id)) in labels.iter().enumerate() {
        out.push(ScoredLabel {
            score,
            id,
            image_id,
            true_positive: result.true_positive[i],
        });
    }
}

fn mean(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.into_iter().flatten().collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Evaluates a prediction bundle against a dataset.
///
/// Per-image work runs on the current rayon pool; reductions happen in
/// image order, so results do not depend on the worker count.
pub fn evaluate(bundle: &PredictionBundle, ds: &Dataset, modes: EvalModes) -> Result<EvalResult, EvalError> {
    let mut triples_by_image: BTreeMap<u64, Vec<&PredictionTriple>> = BTreeMap::new();
    for p in &bundle.associations {
        if ds.image(p.image_id).is_none() {
            return Err(EvalError::UnknownImage {
                id: p.id,
                image_id: p.image_id,
            });
        }
        triples_by_image.entry(p.image_id).or_default().push(p);
    }
    let derived;
    let instance_preds: &[PredictedInstance] = if bundle.instances.is_empty() {
        derived = bundle.derived_instances();
        &derived
    } else {
        &bundle.instances
    };
    let mut inst_by_image: BTreeMap<u64, Vec<&PredictedInstance>> = BTreeMap::new();
    for p in instance_preds {
        if ds.image(p.image_id).is_none() {
            return Err(EvalError::UnknownImage {
                id: p.id,
                image_id: p.image_id,
            });
        }
        inst_by_image.entry(p.image_id).or_default().push(p);
    }

    let image_ids: Vec<u64> = ds.images().iter().map(|i| i.id).collect();
    let gts: Vec<ImageGt> = image_ids.par_iter().map(|&id| image_gt(ds, id)).collect();
    let thresholds = soap_thresholds();
    let empty_t: Vec<&PredictionTriple> = Vec::new();
    let empty_i: Vec<&PredictedInstance> = Vec::new();

    let mut result = EvalResult {
        ap_convention: "coco-101",
        thresholds: thresholds.clone(),
        image_count: image_ids.len(),
        gt_pairs: ds.associations().len(),
        predicted_pairs: bundle.associations.len(),
        segm: None,
        bbox: None,
    };

    for mode in modes.list() {
        let tables: Vec<ImageTables> = image_ids
            .par_iter()
            .zip(gts.par_iter())
            .map(|(id, gt)| {
                let preds = triples_by_image.get(id).unwrap_or(&empty_t);
                let insts = inst_by_image.get(id).unwrap_or(&empty_i);
                build_tables(preds, insts, gt, mode)
            })
            .collect::<Result<_, _>>()?;

        let gt_pairs: usize = gts.iter().map(|g| g.triples.len()).sum();
        let gt_per_cat = [0, 1].map(|slot| tables.iter().map(|t| t.instances[slot].gt_count).sum::<usize>());

        let per_threshold: Vec<ThresholdResult> = thresholds
            .iter()
            .map(|&tau| {
                let mut soap_labels = Vec::new();
                let mut assoc_labels = Vec::new();
                let mut cat_labels = [Vec::new(), Vec::new()];
                for (&image_id, t) in image_ids.iter().zip(&tables) {
                    let n_gt = t.gt_pairs;
                    let n_pred = t.triple_labels.len();
                    let soap = greedy(&t.triple_order, n_pred, n_gt, |p, g| soap_key(&t.triples[p][g], tau));
                    labels_from(image_id, &t.triple_labels, &soap, &mut soap_labels);
                    let assoc = greedy(&t.triple_order, n_pred, n_gt, |p, g| {
                        single_key(t.triples[p][g][2], tau)
                    });
                    labels_from(image_id, &t.triple_labels, &assoc, &mut assoc_labels);
                    for (slot, labels) in cat_labels.iter_mut().enumerate() {
                        let it = &t.instances[slot];
                        let m = greedy(&it.order, it.labels.len(), it.gt_count, |p, g| {
                            single_key(it.ious[p][g], tau)
                        });
                        labels_from(image_id, &it.labels, &m, labels);
                    }
                }
                ThresholdResult {
                    tau,
                    soap: pr_curve(&soap_labels, gt_pairs),
                    association_ap: average_precision(&assoc_labels, gt_pairs),
                    shadow_ap: average_precision(&cat_labels[0], gt_per_cat[0]),
                    object_ap: average_precision(&cat_labels[1], gt_per_cat[1]),
                }
            })
            .collect();

        let at = |tau: f64| {
            per_threshold
                .iter()
                .find(|t| t.tau == tau)
                .and_then(|t| t.soap.as_ref().map(|c| c.ap))
        };
        let all_or_none = |f: &dyn Fn(&ThresholdResult) -> Option<f64>| -> Option<f64> {
            let v: Option<Vec<f64>> = per_threshold.iter().map(f).collect();
            v.map(|v| v.iter().sum::<f64>() / v.len() as f64)
        };
        let shadow_ap = all_or_none(&|t| t.shadow_ap);
        let object_ap = all_or_none(&|t| t.object_ap);
        let set = MetricSet {
            soap: all_or_none(&|t| t.soap.as_ref().map(|c| c.ap)),
            soap50: at(0.5),
            soap75: at(0.75),
            association_ap: all_or_none(&|t| t.association_ap),
            instance_ap: mean([shadow_ap, object_ap]),
            shadow_ap,
            object_ap,
            per_threshold,
        };
        match mode {
            IouMode::Segm => result.segm = Some(set),
            IouMode::Bbox => result.bbox = Some(set),
        }
    }
    Ok(result)
}
