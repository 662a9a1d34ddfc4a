use serde::Serialize;

use super::{derive_object_mask, Category, Dataset};
use crate::mask::{mask_to_box, BBox, BitMask, RleMask};

/// Maximum `|object Δ (association ∖ shadow)| / |association|` before the
/// object mask is reported as inconsistent.
pub const OBJECT_TOLERANCE: f64 = 0.01;

const BOX_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    ObjectMismatch,
    EmptyMask,
    BoxMismatch,
    UnpairedInstance,
    ShadowOutsideAssociation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// e.g. `"association 12"`.
    pub record: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn box_matches(stored: &BBox, mask: &BitMask) -> Option<BBox> {
    let actual = mask_to_box(mask).ok()?;
    let close = |a: f64, b: f64| (a - b).abs() <= BOX_EPS;
    if close(stored.x, actual.x) && close(stored.y, actual.y) && close(stored.w, actual.w) && close(stored.h, actual.h)
    {
        None
    } else {
        Some(actual)
    }
}

fn decode(rle: &RleMask) -> BitMask {
    rle.decode().expect("masks are validated when the dataset is built")
}

/// Reports annotation inconsistencies; never fails.
pub fn validate_dataset(ds: &Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    let push =
        |list: &mut Vec<Violation>, kind, record: String, detail: String| list.push(Violation { kind, record, detail });

    for inst in ds.instances() {
        let record = format!("instance {}", inst.id);
        let mask = decode(&inst.mask);
        if mask.is_empty() {
            push(
                &mut report.violations,
                ViolationKind::EmptyMask,
                record.clone(),
                "mask has no pixels".into(),
            );
        } else if let Some(actual) = box_matches(&inst.bbox, &mask) {
            push(
                &mut report.violations,
                ViolationKind::BoxMismatch,
                record.clone(),
                format!(
                    "bbox {:?} but mask bounds {:?}",
                    <[f64; 4]>::from(inst.bbox),
                    <[f64; 4]>::from(actual)
                ),
            );
        }
        if inst.association_id.is_none() {
            push(
                &mut report.violations,
                ViolationKind::UnpairedInstance,
                record,
                format!("{} instance has no association", inst.category.as_str()),
            );
        }
    }

    for assoc in ds.associations() {
        let record = format!("association {}", assoc.id);
        let mask = decode(&assoc.mask);
        if mask.is_empty() {
            push(
                &mut report.violations,
                ViolationKind::EmptyMask,
                record,
                "mask has no pixels".into(),
            );
            continue;
        }
        if let Some(actual) = box_matches(&assoc.bbox, &mask) {
            push(
                &mut report.violations,
                ViolationKind::BoxMismatch,
                record.clone(),
                format!(
                    "bbox {:?} but mask bounds {:?}",
                    <[f64; 4]>::from(assoc.bbox),
                    <[f64; 4]>::from(actual)
                ),
            );
        }
        let (shadow, object) = ds.pair(assoc);
        debug_assert_eq!(shadow.category, Category::Shadow);
        let shadow_mask = decode(&shadow.mask);
        let outside = shadow_mask.difference(&mask).expect("same image").area();
        if outside > 0 {
            push(
                &mut report.warnings,
                ViolationKind::ShadowOutsideAssociation,
                record.clone(),
                format!("{outside} shadow pixels lie outside the association mask"),
            );
        }
        let derived = derive_object_mask(assoc, shadow).expect("structure checked at load");
        let object_mask = decode(&object.mask);
        let diff = derived.symmetric_difference(&object_mask).expect("same image").area();
        let ratio = diff as f64 / mask.area() as f64;
        if ratio > OBJECT_TOLERANCE {
            push(
                &mut report.violations,
                ViolationKind::ObjectMismatch,
                record,
                format!(
                    "object {} differs from association minus shadow on {diff} pixels ({:.2}% of association)",
                    object.id,
                    100.0 * ratio
                ),
            );
        }
    }
    report
}
