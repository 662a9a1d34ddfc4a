//! Shadow-aware copy-and-paste augmentation.
//!
//! A shadow-object association is copied to a shifted position and
//! composited behind existing objects but above existing shadows and the
//! background. The pasted shadow region is relit from the colour of the
//! shadow it was copied from.
//!
//! Randomness comes from [`StreamRng`]: ChaCha8 seeded with
//! `seed_from_u64(seed)` and one stream per image id, so results do not
//! depend on thread count or image order.

mod paste;

pub use paste::{paste_association, Layering, PasteRejection, Scene, SceneInstance, ScenePair};

use std::collections::BTreeMap;

use image::RgbImage;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{AssociationRecord, Dataset, DatasetError, ImageRecord, InstanceAnnotation};
use crate::mask::{mask_to_box, BBox, BitMask, RleMask};

pub const DEFAULT_PROBABILITY: f64 = 0.5;
pub const MAX_ATTEMPTS: usize = 10;
/// Fraction of the pasted association that must stay inside the image.
pub const MIN_OVERLAP: f64 = 0.25;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("image {image_id} ({file}): {reason}")]
    Image {
        image_id: u64,
        file: String,
        reason: String,
    },
    #[error("region for relighting is empty: {0}")]
    EmptyRegion(&'static str),
    #[error("image is {actual:?}, annotations expect {expected:?}")]
    Dimensions { expected: (u32, u32), actual: (u32, u32) },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Deterministic per-image random stream.
#[derive(Debug, Clone)]
pub struct StreamRng(ChaCha8Rng);

impl StreamRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        StreamRng(rng)
    }

    /// Uniform in `[0, 1)` from the top 53 bits of one `u64`.
    pub fn next_f64(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}

/// Shift for an object of box `object`: `dx` uniform in `[−2W/3, 2W/3]`,
/// `dy` uniform in `(0, 2H/3]`.
pub fn sample_shift(rng: &mut StreamRng, object: &BBox) -> (f64, f64) {
    let (sx, sy) = (2.0 * object.w / 3.0, 2.0 * object.h / 3.0);
    let dx = -sx + rng.next_f64() * 2.0 * sx;
    let dy = sy * (1.0 - rng.next_f64());
    (dx, dy)
}

/// Whole-pixel version of a sampled shift: `dx` truncated toward zero,
/// `dy` floored but at least one pixel.
pub fn pixel_shift((dx, dy): (f64, f64)) -> (i64, i64) {
    (dx.trunc() as i64, (dy.floor() as i64).max(1))
}

fn check_region(image: &RgbImage, m: &BitMask, what: &'static str) -> Result<(), AugmentError> {
    let dims = (image.width(), image.height());
    if m.dims() != dims {
        return Err(AugmentError::Dimensions {
            expected: m.dims(),
            actual: dims,
        });
    }
    if m.is_empty() {
        return Err(AugmentError::EmptyRegion(what));
    }
    Ok(())
}

/// Mean of each RGB channel over the set pixels of `region`.
pub fn channel_means(image: &RgbImage, region: &BitMask) -> Result<[f64; 3], AugmentError> {
    check_region(image, region, "source")?;
    let mut acc = [0u64; 3];
    for (row, col) in region.iter_set() {
        let p = image.get_pixel(col, row).0;
        for c in 0..3 {
            acc[c] += p[c] as u64;
        }
    }
    let n = region.area() as f64;
    Ok(acc.map(|v| v as f64 / n))
}

/// Scales every channel of `target` by `mean(source) / mean(target)`,
/// rounding to the nearest level and clamping to `[0, 255]`. A channel
/// whose target mean is zero is left as is.
pub fn relight(image: &RgbImage, target: &BitMask, source: &BitMask) -> Result<RgbImage, AugmentError> {
    check_region(image, target, "target")?;
    let ms = channel_means(image, source)?;
    relight_to(image, target, ms)
}

/// [`relight`] with the source means given, e.g. from another image.
pub fn relight_to(image: &RgbImage, target: &BitMask, source_means: [f64; 3]) -> Result<RgbImage, AugmentError> {
    let mt = channel_means(image, target).map_err(|e| match e {
        AugmentError::EmptyRegion(_) => AugmentError::EmptyRegion("target"),
        e => e,
    })?;
    let mut out = image.clone();
    for (row, col) in target.iter_set() {
        let px = out.get_pixel_mut(col, row);
        for c in 0..3 {
            if mt[c] > 0.0 {
                px.0[c] = (source_means[c] / mt[c] * px.0[c] as f64).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentStrategy {
    /// Paste one association behind every existing object.
    #[default]
    Full,
    /// Paste only the object, without its shadow.
    ObjectOnly,
    /// Paste one association above its own source object.
    AboveLayering,
    /// Paste two or three associations, one after another.
    MultipleAssociations,
}

impl AugmentStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            AugmentStrategy::Full => "full",
            AugmentStrategy::ObjectOnly => "object_only",
            AugmentStrategy::AboveLayering => "above_layering",
            AugmentStrategy::MultipleAssociations => "multiple_associations",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub strategy: AugmentStrategy,
    pub seed: u64,
    /// Per-image probability of augmenting.
    pub probability: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            strategy: AugmentStrategy::Full,
            seed: 0,
            probability: DEFAULT_PROBABILITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageReport {
    pub image_id: u64,
    /// The per-image coin came up and the image had an association.
    pub selected: bool,
    pub pastes: usize,
    /// Requested pastes for which no valid shift was found.
    pub noops: usize,
}

pub struct AugmentOutput {
    pub dataset: Dataset,
    /// Composited images, keyed by image id; images without a successful
    /// paste are absent and unchanged.
    pub images: BTreeMap<u64, RgbImage>,
    pub reports: Vec<ImageReport>,
}

impl AugmentOutput {
    pub fn pastes(&self) -> usize {
        self.reports.iter().map(|r| r.pastes).sum()
    }
}

/// Tries up to [`MAX_ATTEMPTS`] shifts for the pair at `pair`.
pub fn paste_with_retries(scene: &Scene, pair: usize, strategy: AugmentStrategy, rng: &mut StreamRng) -> Option<Scene> {
    let layering = match strategy {
        AugmentStrategy::AboveLayering => Layering::AboveSource,
        _ => Layering::Behind,
    };
    let with_shadow = strategy != AugmentStrategy::ObjectOnly;
    let object = &scene.instances[scene.pairs[pair].object].mask;
    let bbox = mask_to_box(object).ok()?;
    for _ in 0..MAX_ATTEMPTS {
        let shift = pixel_shift(sample_shift(rng, &bbox));
        if let Ok(next) = paste_association(scene, pair, shift, layering, with_shadow) {
            return Some(next);
        }
    }
    None
}

/// Applies the configured augmentation to one scene with its own stream.
pub fn augment_scene(scene: Scene, cfg: &AugmentConfig, rng: &mut StreamRng, image_id: u64) -> (Scene, ImageReport) {
    let mut report = ImageReport {
        image_id,
        selected: false,
        pastes: 0,
        noops: 0,
    };
    if !rng.chance(cfg.probability) || scene.pairs.is_empty() {
        return (scene, report);
    }
    report.selected = true;
    let original = scene.pairs.len();
    let picks = match cfg.strategy {
        AugmentStrategy::MultipleAssociations => 2 + rng.below(2),
        _ => 1,
    };
    let mut scene = scene;
    for _ in 0..picks {
        let pair = rng.below(original);
        match paste_with_retries(&scene, pair, cfg.strategy, rng) {
            Some(next) => {
                scene = next;
                report.pastes += 1;
            }
            None => report.noops += 1,
        }
    }
    (scene, report)
}

fn png_name(file_name: &str) -> String {
    let path = std::path::Path::new(file_name);
    path.with_extension("png").to_string_lossy().into_owned()
}

/// Augments every image of `ds` independently; `load` supplies the pixels
/// of an image and is only called for images selected for pasting.
///
/// New instance and association ids continue after the current maxima in
/// image order, so the output does not depend on scheduling.
pub fn augment_dataset<F>(ds: &Dataset, cfg: &AugmentConfig, load: F) -> Result<AugmentOutput, AugmentError>
where
    F: Fn(&ImageRecord) -> Result<RgbImage, AugmentError> + Sync,
{
    let results: Vec<Result<(ImageReport, Option<Scene>), AugmentError>> = ds
        .images()
        .par_iter()
        .map(|img| {
            let mut rng = StreamRng::new(cfg.seed, img.id);
            // Peek at the coin before loading pixels.
            let mut peek = rng.clone();
            let has_pairs = ds.associations_in(img.id).next().is_some();
            if !peek.chance(cfg.probability) || !has_pairs {
                let report = ImageReport {
                    image_id: img.id,
                    selected: false,
                    pastes: 0,
                    noops: 0,
                };
                return Ok((report, None));
            }
            let pixels = load(img)?;
            if (pixels.width(), pixels.height()) != (img.width, img.height) {
                return Err(AugmentError::Image {
                    image_id: img.id,
                    file: img.file_name.clone(),
                    reason: format!(
                        "pixels are {}x{}, manifest says {}x{}",
                        pixels.width(),
                        pixels.height(),
                        img.width,
                        img.height
                    ),
                });
            }
            let scene = Scene::from_dataset(ds, img.id, pixels);
            let (scene, report) = augment_scene(scene, cfg, &mut rng, img.id);
            let changed = report.pastes > 0;
            Ok((report, changed.then_some(scene)))
        })
        .collect();

    let (_, mut next_instance, mut next_assoc) = ds.max_ids();
    let (mut images, mut instances, mut associations) = ds.clone().into_parts();
    let inst_pos: BTreeMap<u64, usize> = instances.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
    let assoc_pos: BTreeMap<u64, usize> = associations.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
    let mut out_images = BTreeMap::new();
    let mut reports = Vec::with_capacity(results.len());
    for (img_idx, result) in results.into_iter().enumerate() {
        let (report, scene) = result?;
        reports.push(report);
        let Some(scene) = scene else { continue };
        let image_id = images[img_idx].id;
        let mut ids: Vec<u64> = Vec::with_capacity(scene.instances.len());
        for inst in &scene.instances {
            ids.push(match inst.id {
                Some(id) => id,
                None => {
                    next_instance += 1;
                    next_instance
                }
            });
        }
        let mut pair_of = vec![None; scene.instances.len()];
        let mut pair_ids = Vec::with_capacity(scene.pairs.len());
        for p in &scene.pairs {
            let id = match p.id {
                Some(id) => id,
                None => {
                    next_assoc += 1;
                    next_assoc
                }
            };
            pair_of[p.shadow] = Some(id);
            pair_of[p.object] = Some(id);
            pair_ids.push(id);
        }
        for (k, inst) in scene.instances.iter().enumerate() {
            match inst.id {
                Some(id) if !inst.changed => {
                    debug_assert!(inst_pos.contains_key(&id));
                }
                Some(id) => {
                    let rec = &mut instances[inst_pos[&id]];
                    rec.mask = RleMask::encode(&inst.mask);
                    rec.bbox = mask_to_box(&inst.mask).expect("emptied pastes are rejected");
                }
                None => instances.push(InstanceAnnotation {
                    id: ids[k],
                    image_id,
                    category: inst.category,
                    mask: RleMask::encode(&inst.mask),
                    bbox: mask_to_box(&inst.mask).expect("pasted instances are non-empty"),
                    association_id: pair_of[k],
                    score: None,
                }),
            }
        }
        for (p, &id) in scene.pairs.iter().zip(&pair_ids) {
            let (s, o) = (&scene.instances[p.shadow], &scene.instances[p.object]);
            if p.id.is_some() && !s.changed && !o.changed {
                continue;
            }
            let mask = s.mask.union(&o.mask).expect("same image");
            let bbox = mask_to_box(&mask).expect("non-empty");
            match p.id {
                Some(id) => {
                    let rec = &mut associations[assoc_pos[&id]];
                    rec.mask = RleMask::encode(&mask);
                    rec.bbox = bbox;
                }
                None => associations.push(AssociationRecord {
                    id,
                    image_id,
                    shadow_id: ids[p.shadow],
                    object_id: ids[p.object],
                    mask: RleMask::encode(&mask),
                    bbox,
                    score: None,
                }),
            }
        }
        images[img_idx].file_name = png_name(&images[img_idx].file_name);
        out_images.insert(image_id, scene.image);
    }
    let dataset = Dataset::new(images, instances, associations)?;
    Ok(AugmentOutput {
        dataset,
        images: out_images,
        reports,
    })
}
