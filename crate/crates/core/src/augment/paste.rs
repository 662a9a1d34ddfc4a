use std::collections::BTreeMap;

use image::RgbImage;

use super::{relight, MIN_OVERLAP};
use crate::dataset::{Category, Dataset};
use crate::mask::BitMask;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneInstance {
    /// `None` for instances created by a paste.
    pub id: Option<u64>,
    pub category: Category,
    pub mask: BitMask,
    pub changed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenePair {
    pub id: Option<u64>,
    /// Index into [`Scene::instances`].
    pub shadow: usize,
    pub object: usize,
}

/// One image with its decoded annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: RgbImage,
    pub instances: Vec<SceneInstance>,
    pub pairs: Vec<ScenePair>,
}

impl Scene {
    pub fn from_dataset(ds: &Dataset, image_id: u64, image: RgbImage) -> Scene {
        let mut index = BTreeMap::new();
        let instances = ds
            .instances_in(image_id)
            .enumerate()
            .map(|(k, inst)| {
                index.insert(inst.id, k);
                SceneInstance {
                    id: Some(inst.id),
                    category: inst.category,
                    mask: inst.mask.decode().expect("validated at load"),
                    changed: false,
                }
            })
            .collect();
        let pairs = ds
            .associations_in(image_id)
            .map(|a| ScenePair {
                id: Some(a.id),
                shadow: index[&a.shadow_id],
                object: index[&a.object_id],
            })
            .collect();
        Scene {
            image,
            instances,
            pairs,
        }
    }
}

/// Where the pasted association sits relative to existing objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layering {
    /// Behind every existing object.
    Behind,
    /// Behind existing objects except its own source object, which it
    /// covers.
    AboveSource,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PasteRejection {
    /// Less than the minimum share of the shifted masks is inside the image.
    OutOfFrame,
    /// Nothing of the pasted object is visible.
    ObjectOccluded,
    /// Nothing of the pasted shadow is visible.
    ShadowOccluded,
    /// The paste would hide an existing instance completely.
    HidesInstance(usize),
}

fn minus(a: &BitMask, b: &BitMask) -> BitMask {
    a.difference(b).expect("scene masks share the image size")
}

/// Pastes pair `pair` shifted by `(dx, dy)` pixels.
///
/// Per pixel, top to bottom: protected existing objects, the pasted
/// object (copied from its source pixels), the pasted shadow (relit
/// background), then the original image. Existing instances lose the
/// pixels now covered by the pasted object, and an unprotected source
/// object also loses those under the pasted shadow. With `with_shadow`
/// false only the object pixels are pasted and no annotation is added.
pub fn paste_association(
    scene: &Scene,
    pair: usize,
    (dx, dy): (i64, i64),
    layering: Layering,
    with_shadow: bool,
) -> Result<Scene, PasteRejection> {
    let (w, h) = (scene.image.width(), scene.image.height());
    let src = scene.pairs[pair];
    let src_object = &scene.instances[src.object].mask;
    let src_shadow = &scene.instances[src.shadow].mask;

    let moved_object = src_object.translate(dx, dy);
    let moved_shadow = src_shadow.translate(dx, dy);
    let (before, after) = if with_shadow {
        let (a, b) = (
            src_object.union(src_shadow).expect("same image"),
            moved_object.union(&moved_shadow).expect("same image"),
        );
        (a.area(), b.area())
    } else {
        (src_object.area(), moved_object.area())
    };
    if before == 0 || (after as f64) < MIN_OVERLAP * before as f64 {
        return Err(PasteRejection::OutOfFrame);
    }

    let protected = |k: usize| {
        scene.instances[k].category == Category::Object && !(layering == Layering::AboveSource && k == src.object)
    };
    let mut occluders = BitMask::new(w, h);
    for (k, inst) in scene.instances.iter().enumerate() {
        if protected(k) {
            occluders = occluders.union(&inst.mask).expect("same image");
        }
    }
    let new_object = minus(&moved_object, &occluders);
    if new_object.is_empty() {
        return Err(PasteRejection::ObjectOccluded);
    }
    let new_shadow = if with_shadow {
        let s = minus(&minus(&moved_shadow, &occluders), &new_object);
        if s.is_empty() {
            return Err(PasteRejection::ShadowOccluded);
        }
        s
    } else {
        BitMask::new(w, h)
    };

    let mut instances = scene.instances.clone();
    for (k, inst) in instances.iter_mut().enumerate() {
        if protected(k) {
            continue;
        }
        let mut covered = new_object.clone();
        if inst.category == Category::Object {
            covered = covered.union(&new_shadow).expect("same image");
        }
        if inst.mask.intersection_area(&covered) == 0 {
            continue;
        }
        let kept = minus(&inst.mask, &covered);
        if kept.is_empty() {
            return Err(PasteRejection::HidesInstance(k));
        }
        inst.mask = kept;
        inst.changed = true;
    }

    let mut image = if with_shadow {
        relight(&scene.image, &new_shadow, src_shadow).expect("both regions are non-empty")
    } else {
        scene.image.clone()
    };
    for (row, col) in new_object.iter_set() {
        let from = scene
            .image
            .get_pixel((col as i64 - dx) as u32, (row as i64 - dy) as u32);
        image.put_pixel(col, row, *from);
    }

    let mut pairs = scene.pairs.clone();
    if with_shadow {
        let base = instances.len();
        instances.push(SceneInstance {
            id: None,
            category: Category::Shadow,
            mask: new_shadow,
            changed: true,
        });
        instances.push(SceneInstance {
            id: None,
            category: Category::Object,
            mask: new_object,
            changed: true,
        });
        pairs.push(ScenePair {
            id: None,
            shadow: base,
            object: base + 1,
        });
    }
    Ok(Scene {
        image,
        instances,
        pairs,
    })
}
