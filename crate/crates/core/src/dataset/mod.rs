//! SOBA-style datasets: images, shadow/object instance annotations and
//! shadow-object association records.
//!
//! On disk a split is one JSON manifest:
//!
//! ```json
//! {
//!   "format": "soba-manifest",
//!   "version": 1,
//!   "images": [{"id": 1, "file_name": "a.png", "width": 640, "height": 480}],
//!   "instances": [{"id": 1, "image_id": 1, "category": "shadow",
//!                  "mask": {"width": 640, "height": 480, "counts": [..]},
//!                  "bbox": [x, y, w, h], "association_id": 1}],
//!   "associations": [{"id": 1, "image_id": 1, "shadow_id": 1, "object_id": 2,
//!                     "mask": {..}, "bbox": [x, y, w, h]}]
//! }
//! ```
//!
//! Masks are column-major RLE (see [`crate::mask::RleMask`]). `score` is
//! optional on instances and associations.

mod import;
mod stats;
mod validate;

pub use import::{import_soba, ImportOptions};
pub use stats::{compute_stats, DatasetStats, AREA_BINS};
pub use validate::{validate_dataset, ValidationReport, Violation, ViolationKind};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::{BBox, BitMask, MaskError, RleMask};

pub const MANIFEST_FORMAT: &str = "soba-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported manifest format {format:?} version {version}")]
    UnsupportedVersion { format: String, version: u32 },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: u64 },
    #[error("{kind} {id}: {field} refers to missing {target} {target_id}")]
    DanglingReference {
        kind: &'static str,
        id: u64,
        field: &'static str,
        target: &'static str,
        target_id: u64,
    },
    #[error("{kind} {id}: {reason}")]
    Record {
        kind: &'static str,
        id: u64,
        reason: String,
    },
    #[error("{kind} {id}: {source}")]
    Mask {
        kind: &'static str,
        id: u64,
        #[source]
        source: MaskError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Shadow,
    Object,
}

impl Category {
    pub fn opposite(self) -> Self {
        match self {
            Category::Shadow => Category::Object,
            Category::Object => Category::Shadow,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Shadow => "shadow",
            Category::Object => "object",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category: Category,
    pub mask: RleMask,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub association_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRecord {
    pub id: u64,
    pub image_id: u64,
    pub shadow_id: u64,
    pub object_id: u64,
    pub mask: RleMask,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    #[serde(default)]
    images: Vec<ImageRecord>,
    #[serde(default)]
    instances: Vec<InstanceAnnotation>,
    #[serde(default)]
    associations: Vec<AssociationRecord>,
}

#[derive(Serialize)]
struct ManifestRef<'a> {
    format: &'static str,
    version: u32,
    images: &'a [ImageRecord],
    instances: &'a [InstanceAnnotation],
    associations: &'a [AssociationRecord],
}

/// A cross-referenced, structurally valid dataset. Immutable once built.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    images: Vec<ImageRecord>,
    instances: Vec<InstanceAnnotation>,
    associations: Vec<AssociationRecord>,
    image_index: BTreeMap<u64, usize>,
    instance_index: BTreeMap<u64, usize>,
    association_index: BTreeMap<u64, usize>,
    instances_by_image: BTreeMap<u64, Vec<usize>>,
    associations_by_image: BTreeMap<u64, Vec<usize>>,
}

fn index_ids<T>(items: &[T], kind: &'static str, id: impl Fn(&T) -> u64) -> Result<BTreeMap<u64, usize>, DatasetError> {
    let mut index = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        if index.insert(id(item), i).is_some() {
            return Err(DatasetError::DuplicateId { kind, id: id(item) });
        }
    }
    Ok(index)
}

impl Dataset {
    /// Checks referential integrity and builds the lookup indices.
    pub fn new(
        images: Vec<ImageRecord>,
        instances: Vec<InstanceAnnotation>,
        associations: Vec<AssociationRecord>,
    ) -> Result<Self, DatasetError> {
        let image_index = index_ids(&images, "image", |r| r.id)?;
        let instance_index = index_ids(&instances, "instance", |r| r.id)?;
        let association_index = index_ids(&associations, "association", |r| r.id)?;

        for img in &images {
            if img.width == 0 || img.height == 0 {
                return Err(DatasetError::Record {
                    kind: "image",
                    id: img.id,
                    reason: format!("non-positive size {}x{}", img.width, img.height),
                });
            }
        }

        let check_mask = |kind: &'static str, id: u64, image_id: u64, mask: &RleMask| {
            let img = image_index
                .get(&image_id)
                .map(|&i| &images[i])
                .ok_or(DatasetError::DanglingReference {
                    kind,
                    id,
                    field: "image_id",
                    target: "image",
                    target_id: image_id,
                })?;
            mask.validate()
                .map_err(|source| DatasetError::Mask { kind, id, source })?;
            if (mask.width, mask.height) != (img.width, img.height) {
                return Err(DatasetError::Record {
                    kind,
                    id,
                    reason: format!(
                        "mask is {}x{} but image {} is {}x{}",
                        mask.width, mask.height, img.id, img.width, img.height
                    ),
                });
            }
            Ok(())
        };

        for inst in &instances {
            check_mask("instance", inst.id, inst.image_id, &inst.mask)?;
            if let Some(aid) = inst.association_id {
                let assoc =
                    association_index
                        .get(&aid)
                        .map(|&i| &associations[i])
                        .ok_or(DatasetError::DanglingReference {
                            kind: "instance",
                            id: inst.id,
                            field: "association_id",
                            target: "association",
                            target_id: aid,
                        })?;
                let partner_field = match inst.category {
                    Category::Shadow => assoc.shadow_id,
                    Category::Object => assoc.object_id,
                };
                if partner_field != inst.id {
                    return Err(DatasetError::Record {
                        kind: "instance",
                        id: inst.id,
                        reason: format!(
                            "claims association {aid}, whose {} is instance {partner_field}",
                            inst.category.as_str()
                        ),
                    });
                }
            }
        }

        for assoc in &associations {
            check_mask("association", assoc.id, assoc.image_id, &assoc.mask)?;
            for (field, target_id, category) in [
                ("shadow_id", assoc.shadow_id, Category::Shadow),
                ("object_id", assoc.object_id, Category::Object),
            ] {
                let inst =
                    instance_index
                        .get(&target_id)
                        .map(|&i| &instances[i])
                        .ok_or(DatasetError::DanglingReference {
                            kind: "association",
                            id: assoc.id,
                            field,
                            target: "instance",
                            target_id,
                        })?;
                if inst.category != category {
                    return Err(DatasetError::Record {
                        kind: "association",
                        id: assoc.id,
                        reason: format!("{field} {target_id} is not a {} instance", category.as_str()),
                    });
                }
                if inst.image_id != assoc.image_id {
                    return Err(DatasetError::Record {
                        kind: "association",
                        id: assoc.id,
                        reason: format!("{field} {target_id} belongs to image {}", inst.image_id),
                    });
                }
                if inst.association_id != Some(assoc.id) {
                    return Err(DatasetError::Record {
                        kind: "association",
                        id: assoc.id,
                        reason: format!("instance {target_id} does not point back to this association"),
                    });
                }
            }
        }

        let mut instances_by_image: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, inst) in instances.iter().enumerate() {
            instances_by_image.entry(inst.image_id).or_default().push(i);
        }
        let mut associations_by_image: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, a) in associations.iter().enumerate() {
            associations_by_image.entry(a.image_id).or_default().push(i);
        }

        Ok(Self {
            images,
            instances,
            associations,
            image_index,
            instance_index,
            association_index,
            instances_by_image,
            associations_by_image,
        })
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, DatasetError> {
        if bytes.iter().all(u8::is_ascii_whitespace) {
            return Ok(Self::default());
        }
        let manifest: Manifest = serde_json::from_slice(bytes)?;
        if manifest.format != MANIFEST_FORMAT || manifest.version != MANIFEST_VERSION {
            return Err(DatasetError::UnsupportedVersion {
                format: manifest.format,
                version: manifest.version,
            });
        }
        Self::new(manifest.images, manifest.instances, manifest.associations)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let bytes = std::fs::read(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_slice(&bytes)
    }

    pub fn to_json(&self) -> Vec<u8> {
        crate::io::to_json_pretty(&ManifestRef {
            format: MANIFEST_FORMAT,
            version: MANIFEST_VERSION,
            images: &self.images,
            instances: &self.instances,
            associations: &self.associations,
        })
        .expect("manifest serialization cannot fail")
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        crate::io::write_atomic(path, &self.to_json()).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn instances(&self) -> &[InstanceAnnotation] {
        &self.instances
    }

    pub fn associations(&self) -> &[AssociationRecord] {
        &self.associations
    }

    pub fn image(&self, id: u64) -> Option<&ImageRecord> {
        self.image_index.get(&id).map(|&i| &self.images[i])
    }

    pub fn instance(&self, id: u64) -> Option<&InstanceAnnotation> {
        self.instance_index.get(&id).map(|&i| &self.instances[i])
    }

    pub fn association(&self, id: u64) -> Option<&AssociationRecord> {
        self.association_index.get(&id).map(|&i| &self.associations[i])
    }

    pub fn instances_in(&self, image_id: u64) -> impl Iterator<Item = &InstanceAnnotation> {
        self.instances_by_image
            .get(&image_id)
            .into_iter()
            .flatten()
            .map(|&i| &self.instances[i])
    }

    pub fn associations_in(&self, image_id: u64) -> impl Iterator<Item = &AssociationRecord> {
        self.associations_by_image
            .get(&image_id)
            .into_iter()
            .flatten()
            .map(|&i| &self.associations[i])
    }

    /// Shadow and object instances of an association.
    pub fn pair(&self, assoc: &AssociationRecord) -> (&InstanceAnnotation, &InstanceAnnotation) {
        (
            self.instance(assoc.shadow_id).expect("checked at construction"),
            self.instance(assoc.object_id).expect("checked at construction"),
        )
    }

    pub fn max_ids(&self) -> (u64, u64, u64) {
        (
            self.image_index.keys().next_back().copied().unwrap_or(0),
            self.instance_index.keys().next_back().copied().unwrap_or(0),
            self.association_index.keys().next_back().copied().unwrap_or(0),
        )
    }

    pub fn into_parts(self) -> (Vec<ImageRecord>, Vec<InstanceAnnotation>, Vec<AssociationRecord>) {
        (self.images, self.instances, self.associations)
    }
}

/// Object mask as the association mask minus its shadow mask.
pub fn derive_object_mask(assoc: &AssociationRecord, shadow: &InstanceAnnotation) -> Result<BitMask, DatasetError> {
    if shadow.image_id != assoc.image_id {
        return Err(DatasetError::Record {
            kind: "association",
            id: assoc.id,
            reason: format!("shadow {} is on image {}", shadow.id, shadow.image_id),
        });
    }
    if shadow.category != Category::Shadow || shadow.association_id != Some(assoc.id) {
        return Err(DatasetError::Record {
            kind: "association",
            id: assoc.id,
            reason: format!("instance {} is not this association's shadow", shadow.id),
        });
    }
    let mask_err = |source| DatasetError::Mask {
        kind: "association",
        id: assoc.id,
        source,
    };
    let a = assoc.mask.decode().map_err(mask_err)?;
    let s = shadow.mask.decode().map_err(mask_err)?;
    a.difference(&s).map_err(mask_err)
}
