//! Importer for the published SOBA annotation files.
//!
//! Those files follow COCO structure: `images`, `categories` and
//! `annotations`, with each instance annotation carrying an `association`
//! key that is shared by the shadow and object of one pair within an image.
//! Association masks live in a second file of the same shape, keyed the
//! same way. Segmentations must be RLE (compressed string or raw counts).

use std::collections::BTreeMap;

use serde::Deserialize;

use super::{AssociationRecord, Category, Dataset, DatasetError, ImageRecord, InstanceAnnotation};
use crate::mask::{mask_to_box_or_zero, BitMask, RleMask};

#[derive(Debug, Clone, Default)]
pub struct ImportOptions {
    /// Recompute object masks as association minus shadow.
    pub derive_objects: bool,
}

#[derive(Deserialize)]
struct CocoFile {
    #[serde(default)]
    images: Vec<CocoImage>,
    #[serde(default)]
    categories: Vec<CocoCategory>,
    #[serde(default)]
    annotations: Vec<CocoAnnotation>,
}

#[derive(Deserialize)]
struct CocoImage {
    id: u64,
    file_name: String,
    width: u32,
    height: u32,
}

#[derive(Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

#[derive(Deserialize)]
struct CocoAnnotation {
    id: u64,
    image_id: u64,
    #[serde(default)]
    category_id: u64,
    segmentation: serde_json::Value,
    #[serde(default)]
    association: Option<u64>,
    #[serde(default)]
    score: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RleCounts {
    Compressed(String),
    Raw(Vec<u32>),
}

#[derive(Deserialize)]
struct CocoRle {
    size: [u32; 2],
    counts: RleCounts,
}

fn record_err(kind: &'static str, id: u64, reason: impl Into<String>) -> DatasetError {
    DatasetError::Record {
        kind,
        id,
        reason: reason.into(),
    }
}

fn parse_segmentation(ann: &CocoAnnotation, img: &CocoImage) -> Result<RleMask, DatasetError> {
    if ann.segmentation.is_array() {
        return Err(record_err(
            "annotation",
            ann.id,
            "polygon segmentation is not supported; convert to RLE first",
        ));
    }
    let rle: CocoRle = serde_json::from_value(ann.segmentation.clone())
        .map_err(|e| record_err("annotation", ann.id, format!("bad RLE segmentation: {e}")))?;
    let [h, w] = rle.size;
    if (w, h) != (img.width, img.height) {
        return Err(record_err(
            "annotation",
            ann.id,
            format!(
                "RLE size {w}x{h} differs from image {} ({}x{})",
                img.id, img.width, img.height
            ),
        ));
    }
    let mask_err = |source| DatasetError::Mask {
        kind: "annotation",
        id: ann.id,
        source,
    };
    match rle.counts {
        RleCounts::Compressed(s) => RleMask::from_coco_string(w, h, &s).map_err(mask_err),
        RleCounts::Raw(c) => RleMask::normalized(w, h, &c).map_err(mask_err),
    }
}

fn category_of(categories: &BTreeMap<u64, String>, ann: &CocoAnnotation) -> Result<Category, DatasetError> {
    let name = categories
        .get(&ann.category_id)
        .ok_or_else(|| record_err("annotation", ann.id, format!("unknown category_id {}", ann.category_id)))?
        .to_ascii_lowercase();
    if name.contains("shadow") {
        Ok(Category::Shadow)
    } else if name.contains("object") {
        Ok(Category::Object)
    } else {
        Err(record_err(
            "annotation",
            ann.id,
            format!("category {name:?} is neither shadow nor object"),
        ))
    }
}

/// Converts SOBA instance + association files into a [`Dataset`].
///
/// Pairs are formed from the instances sharing `(image_id, association)`.
/// Instances whose group lacks a partner are kept unpaired. Without an
/// association file the association mask is the shadow ∪ object union.
pub fn import_soba(
    instances_json: &[u8],
    associations_json: Option<&[u8]>,
    opts: &ImportOptions,
) -> Result<Dataset, DatasetError> {
    let inst_file: CocoFile = serde_json::from_slice(instances_json)?;
    let categories: BTreeMap<u64, String> = inst_file.categories.iter().map(|c| (c.id, c.name.clone())).collect();
    let images: BTreeMap<u64, &CocoImage> = inst_file.images.iter().map(|i| (i.id, i)).collect();
    if images.len() != inst_file.images.len() {
        let mut seen = std::collections::BTreeSet::new();
        let dup = inst_file
            .images
            .iter()
            .find(|i| !seen.insert(i.id))
            .expect("duplicate exists");
        return Err(DatasetError::DuplicateId {
            kind: "image",
            id: dup.id,
        });
    }
    let image_of = |ann: &CocoAnnotation| {
        images
            .get(&ann.image_id)
            .copied()
            .ok_or(DatasetError::DanglingReference {
                kind: "annotation",
                id: ann.id,
                field: "image_id",
                target: "image",
                target_id: ann.image_id,
            })
    };

    // (image, key) -> (shadow, object) instance indices
    type Group = (Option<usize>, Option<usize>);
    let mut groups: BTreeMap<(u64, u64), Group> = BTreeMap::new();
    let mut instances = Vec::with_capacity(inst_file.annotations.len());
    for ann in &inst_file.annotations {
        let img = image_of(ann)?;
        let category = category_of(&categories, ann)?;
        let mask = parse_segmentation(ann, img)?;
        let bbox = mask_to_box_or_zero(&mask.decode().expect("normalized RLE decodes"));
        let idx = instances.len();
        if let Some(key) = ann.association {
            let slot = groups.entry((ann.image_id, key)).or_default();
            let target = match category {
                Category::Shadow => &mut slot.0,
                Category::Object => &mut slot.1,
            };
            if let Some(prev) = target.replace(idx) {
                let prev: &InstanceAnnotation = &instances[prev];
                return Err(record_err(
                    "annotation",
                    ann.id,
                    format!(
                        "second {} for association {key} on image {} (first: {})",
                        category.as_str(),
                        ann.image_id,
                        prev.id
                    ),
                ));
            }
        }
        instances.push(InstanceAnnotation {
            id: ann.id,
            image_id: ann.image_id,
            category,
            mask,
            bbox,
            association_id: None,
            score: ann.score,
        });
    }

    let mut assoc_masks: BTreeMap<(u64, u64), RleMask> = BTreeMap::new();
    if let Some(bytes) = associations_json {
        let file: CocoFile = serde_json::from_slice(bytes)?;
        for ann in &file.annotations {
            let img = image_of(ann)?;
            let key = ann.association.unwrap_or(ann.id);
            let mask = parse_segmentation(ann, img)?;
            if assoc_masks.insert((ann.image_id, key), mask).is_some() {
                return Err(record_err(
                    "association annotation",
                    ann.id,
                    format!("duplicate association key {key} on image {}", ann.image_id),
                ));
            }
        }
    }

    let mut associations = Vec::new();
    for (&(image_id, key), &(shadow, object)) in &groups {
        let (Some(si), Some(oi)) = (shadow, object) else {
            continue;
        };
        let id = associations.len() as u64 + 1;
        let shadow_mask = instances[si].mask.decode().expect("normalized");
        let union = || -> BitMask {
            let object_mask = instances[oi].mask.decode().expect("normalized");
            shadow_mask.union(&object_mask).expect("same image")
        };
        let mask = match assoc_masks.get(&(image_id, key)) {
            Some(m) => m.clone(),
            None => RleMask::encode(&union()),
        };
        let assoc_bits = mask.decode().expect("normalized");
        if opts.derive_objects {
            let object = assoc_bits.difference(&shadow_mask).expect("same image");
            instances[oi].bbox = mask_to_box_or_zero(&object);
            instances[oi].mask = RleMask::encode(&object);
        }
        instances[si].association_id = Some(id);
        instances[oi].association_id = Some(id);
        associations.push(AssociationRecord {
            id,
            image_id,
            shadow_id: instances[si].id,
            object_id: instances[oi].id,
            bbox: mask_to_box_or_zero(&assoc_bits),
            mask,
            score: None,
        });
    }

    let images = inst_file
        .images
        .iter()
        .map(|i| ImageRecord {
            id: i.id,
            file_name: i.file_name.clone(),
            width: i.width,
            height: i.height,
        })
        .collect();
    Dataset::new(images, instances, associations)
}
