#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use soba_core::association::{DetectionBundle, DetectionImage, DetectionRecord, Point};
use soba_core::dataset::{AssociationRecord, Category, Dataset, ImageRecord, InstanceAnnotation};
use soba_core::eval::PredictionTriple;
use soba_core::mask::{mask_to_box, BitMask, RleMask};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One pair per entry: (shadow, object), disjoint and non-empty.
pub type Layout = Vec<(BitMask, BitMask)>;

pub fn build_dataset(w: u32, h: u32, images: &[Layout]) -> Dataset {
    let mut image_recs = Vec::new();
    let mut instances = Vec::new();
    let mut associations = Vec::new();
    let (mut inst, mut assoc) = (0u64, 0u64);
    for (i, layout) in images.iter().enumerate() {
        let image_id = i as u64 + 1;
        image_recs.push(ImageRecord {
            id: image_id,
            file_name: format!("{image_id}.png"),
            width: w,
            height: h,
        });
        for (shadow, object) in layout {
            assoc += 1;
            let (sid, oid) = (inst + 1, inst + 2);
            inst += 2;
            for (id, category, m) in [(sid, Category::Shadow, shadow), (oid, Category::Object, object)] {
                instances.push(InstanceAnnotation {
                    id,
                    image_id,
                    category,
                    mask: RleMask::encode(m),
                    bbox: mask_to_box(m).unwrap(),
                    association_id: Some(assoc),
                    score: None,
                });
            }
            let union = shadow.union(object).unwrap();
            associations.push(AssociationRecord {
                id: assoc,
                image_id,
                shadow_id: sid,
                object_id: oid,
                mask: RleMask::encode(&union),
                bbox: mask_to_box(&union).unwrap(),
                score: None,
            });
        }
    }
    Dataset::new(image_recs, instances, associations).unwrap()
}

pub fn random_rect(rng: &mut ChaCha8Rng, w: u32, h: u32) -> BitMask {
    let rw = rng.gen_range(2..=w as i64 / 2);
    let rh = rng.gen_range(2..=h as i64 / 2);
    let x = rng.gen_range(0..=w as i64 - rw);
    let y = rng.gen_range(0..=h as i64 - rh);
    BitMask::rect(w, h, x, y, rw, rh)
}

/// A random pair with the object carved out of the shadow's complement.
pub fn random_pair(rng: &mut ChaCha8Rng, w: u32, h: u32) -> (BitMask, BitMask) {
    loop {
        let shadow = random_rect(rng, w, h);
        let object = random_rect(rng, w, h).difference(&shadow).unwrap();
        if !object.is_empty() {
            return (shadow, object);
        }
    }
}

/// Pairs on a grid of non-overlapping cells: object on top, shadow below.
pub fn grid_layout(w: u32, h: u32, pairs: usize, jitter: i64) -> Layout {
    let cols = (w / 16).max(1) as usize;
    (0..pairs)
        .map(|k| {
            let (cx, cy) = ((k % cols) as i64 * 16, (k / cols) as i64 * 16);
            let object = BitMask::rect(w, h, cx + 2 + jitter % 3, cy + 1, 6, 8);
            let shadow = BitMask::rect(w, h, cx + 3, cy + 9, 10, 4 + jitter % 2);
            (shadow, object)
        })
        .collect()
}

pub fn bool_grid(m: &BitMask) -> Vec<bool> {
    m.to_bools()
}

fn center_of(m: &BitMask) -> Point {
    let b = mask_to_box(m).unwrap();
    let (x, y) = b.center();
    Point::new(x, y)
}

/// Detections a perfect network would emit: exact masks, partner masks in
/// the associated branch, and offsets with `A = L + O·C` landing on the
/// partner's center.
pub fn detections_from_gt(ds: &Dataset) -> DetectionBundle {
    let images = ds
        .images()
        .iter()
        .map(|img| {
            let mut dets = Vec::new();
            for a in ds.associations_in(img.id) {
                let (s, o) = ds.pair(a);
                let (sm, om) = (s.mask.decode().unwrap(), o.mask.decode().unwrap());
                let (sc, oc) = (center_of(&sm), center_of(&om));
                for (inst, own, partner, c, pc, sign) in [(s, &sm, &om, sc, oc, 1.0), (o, &om, &sm, oc, sc, -1.0)] {
                    dets.push(DetectionRecord {
                        id: inst.id,
                        category: inst.category,
                        center: c,
                        offset: Point::new(sign * (pc.x - c.x), sign * (pc.y - c.y)),
                        score: 0.9 - 0.001 * inst.id as f64,
                        main_mask: RleMask::encode(own),
                        associated_mask: Some(RleMask::encode(partner)),
                        main_scores: None,
                        associated_scores: None,
                    });
                }
            }
            DetectionImage::new(img.id, img.width, img.height, dets)
        })
        .collect();
    DetectionBundle::new(images).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleMetrics {
    pub soap: Option<f64>,
    pub soap50: Option<f64>,
    pub soap75: Option<f64>,
    pub association_ap: Option<f64>,
    pub instance_ap: Option<f64>,
}

struct Pix {
    bits: Vec<bool>,
    w: usize,
}

impl Pix {
    fn new(m: &BitMask) -> Self {
        Pix {
            bits: m.to_bools(),
            w: m.width() as usize,
        }
    }

    /// Inclusive column range, inclusive row range.
    fn tight_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut b: Option<(usize, usize, usize, usize)> = None;
        for (i, &on) in self.bits.iter().enumerate() {
            if on {
                let (r, c) = (i / self.w, i % self.w);
                b = Some(match b {
                    None => (c, c, r, r),
                    Some((c0, c1, r0, r1)) => (c0.min(c), c1.max(c), r0.min(r), r1.max(r)),
                });
            }
        }
        b
    }
}

fn iou(a: &Pix, b: &Pix, boxes: bool) -> f64 {
    if boxes {
        let (Some(p), Some(q)) = (a.tight_box(), b.tight_box()) else {
            return 0.0;
        };
        let span = |lo0: usize, hi0: usize, lo1: usize, hi1: usize| {
            let lo = lo0.max(lo1);
            let hi = hi0.min(hi1);
            if hi >= lo {
                hi - lo + 1
            } else {
                0
            }
        };
        let inter = span(p.0, p.1, q.0, q.1) * span(p.2, p.3, q.2, q.3);
        let area = |t: (usize, usize, usize, usize)| (t.1 - t.0 + 1) * (t.3 - t.2 + 1);
        let union = area(p) + area(q) - inter;
        return inter as f64 / union as f64;
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (x, y) in a.bits.iter().zip(&b.bits) {
        inter += (*x && *y) as usize;
        union += (*x || *y) as usize;
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// (score, id, image, true positive)
type Label = (f64, u64, u64, bool);

fn ap(mut labels: Vec<Label>, gt: usize) -> Option<f64> {
    if gt == 0 {
        return None;
    }
    labels.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut points = Vec::new();
    let mut tp = 0;
    for (k, l) in labels.iter().enumerate() {
        if l.3 {
            tp += 1;
        }
        points.push((tp as f64 / gt as f64, tp as f64 / (k + 1) as f64));
    }
    let mut total = 0.0;
    for i in 0..=100 {
        let r = i as f64 / 100.0;
        let best = points.iter().filter(|p| p.0 >= r).map(|p| p.1).fold(0.0, f64::max);
        total += best;
    }
    Some(100.0 * total / 101.0)
}

/// Greedy: predictions by descending score then id; each takes the
/// qualifying unmatched ground truth with the highest key, first on ties.
fn greedy(preds: &[(f64, u64)], n_gt: usize, key: impl Fn(usize, usize) -> Option<f64>) -> Vec<bool> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .0
            .partial_cmp(&preds[a].0)
            .unwrap()
            .then(preds[a].1.cmp(&preds[b].1))
    });
    let mut taken = vec![false; n_gt];
    let mut tp = vec![false; preds.len()];
    for p in order {
        let mut best: Option<(usize, f64)> = None;
        for g in 0..n_gt {
            if taken[g] {
                continue;
            }
            if let Some(k) = key(p, g) {
                if best.is_none() || k > best.unwrap().1 {
                    best = Some((g, k));
                }
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            tp[p] = true;
        }
    }
    tp
}

fn mean_all(v: &[Option<f64>]) -> Option<f64> {
    let mut s = 0.0;
    for x in v {
        s += (*x)?;
    }
    Some(s / v.len() as f64)
}

/// Straight-line SOAP / association AP / instance AP, percentages.
/// Instance predictions are the triples' members (shadow id `2t`, object
/// id `2t + 1`).
pub fn oracle_evaluate(ds: &Dataset, preds: &[PredictionTriple], boxes: bool) -> OracleMetrics {
    let taus: Vec<f64> = (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect();
    let mut soap = Vec::new();
    let mut assoc_ap = Vec::new();
    let mut inst_ap = [Vec::new(), Vec::new()];
    for &tau in &taus {
        let mut soap_labels = Vec::new();
        let mut assoc_labels = Vec::new();
        let mut inst_labels = [Vec::new(), Vec::new()];
        let mut gt_pairs = 0;
        let mut gt_inst = [0, 0];
        for img in ds.images() {
            let gts: Vec<[Pix; 3]> = ds
                .associations_in(img.id)
                .map(|a| {
                    let (s, o) = ds.pair(a);
                    [
                        s.mask.decode().unwrap(),
                        o.mask.decode().unwrap(),
                        a.mask.decode().unwrap(),
                    ]
                    .map(|m| Pix::new(&m))
                })
                .collect();
            let ps: Vec<&PredictionTriple> = preds.iter().filter(|p| p.image_id == img.id).collect();
            let pix: Vec<[Pix; 3]> = ps
                .iter()
                .map(|p| [&p.shadow.mask, &p.object.mask, &p.association.mask].map(Pix::new))
                .collect();
            let table: Vec<Vec<[f64; 3]>> = pix
                .iter()
                .map(|p| {
                    gts.iter()
                        .map(|g| {
                            [
                                iou(&p[0], &g[0], boxes),
                                iou(&p[1], &g[1], boxes),
                                iou(&p[2], &g[2], boxes),
                            ]
                        })
                        .collect()
                })
                .collect();
            let scored: Vec<(f64, u64)> = ps.iter().map(|p| (p.score, p.id)).collect();
            let soap_tp = greedy(&scored, gts.len(), |p, g| {
                let t = table[p][g];
                (t[0] >= tau && t[1] >= tau && t[2] >= tau).then_some(t[2])
            });
            let assoc_tp = greedy(&scored, gts.len(), |p, g| {
                (table[p][g][2] >= tau).then_some(table[p][g][2])
            });
            for (k, p) in ps.iter().enumerate() {
                soap_labels.push((p.score, p.id, img.id, soap_tp[k]));
                assoc_labels.push((p.score, p.id, img.id, assoc_tp[k]));
            }
            gt_pairs += gts.len();

            for (slot, cat) in [Category::Shadow, Category::Object].into_iter().enumerate() {
                let gi: Vec<Pix> = ds
                    .instances_in(img.id)
                    .filter(|i| i.category == cat)
                    .map(|i| Pix::new(&i.mask.decode().unwrap()))
                    .collect();
                let inst_scored: Vec<(f64, u64)> = ps.iter().map(|p| (p.score, 2 * p.id + slot as u64)).collect();
                let tp = greedy(&inst_scored, gi.len(), |p, g| {
                    let v = iou(&pix[p][slot], &gi[g], boxes);
                    (v >= tau).then_some(v)
                });
                for (k, s) in inst_scored.iter().enumerate() {
                    inst_labels[slot].push((s.0, s.1, img.id, tp[k]));
                }
                gt_inst[slot] += gi.len();
            }
        }
        soap.push(ap(soap_labels, gt_pairs));
        assoc_ap.push(ap(assoc_labels, gt_pairs));
        for slot in 0..2 {
            inst_ap[slot].push(ap(std::mem::take(&mut inst_labels[slot]), gt_inst[slot]));
        }
    }
    let shadow = mean_all(&inst_ap[0]);
    let object = mean_all(&inst_ap[1]);
    let instance_ap = match (shadow, object) {
        (Some(a), Some(b)) => Some((a + b) / 2.0),
        (a, b) => a.or(b),
    };
    OracleMetrics {
        soap: mean_all(&soap),
        soap50: soap[0],
        soap75: soap[5],
        association_ap: mean_all(&assoc_ap),
        instance_ap,
    }
}

/// A micro-dataset with predictions: GT pairs perturbed by small shifts,
/// a few random distractors and coarse scores so ties occur.
pub fn micro_case(seed: u64) -> (Dataset, Vec<PredictionTriple>) {
    let mut r = rng(seed);
    let (w, h) = (24, 20);
    let n_images = r.gen_range(1..=3);
    let mut layouts = Vec::new();
    for _ in 0..n_images {
        let n = r.gen_range(0..=5);
        layouts.push((0..n).map(|_| random_pair(&mut r, w, h)).collect::<Layout>());
    }
    let ds = build_dataset(w, h, &layouts);
    let mut preds = Vec::new();
    let mut id = 0;
    for (i, layout) in layouts.iter().enumerate() {
        let n = r.gen_range(0..=8);
        for _ in 0..n {
            id += 1;
            let (s, o) = if !layout.is_empty() && r.gen_bool(0.7) {
                let (s, o) = &layout[r.gen_range(0..layout.len())];
                let mut shift = || (r.gen_range(-1..=1), r.gen_range(-1..=1));
                let (a, b) = (shift(), shift());
                (s.translate(a.0, a.1), o.translate(b.0, b.1))
            } else {
                random_pair(&mut r, w, h)
            };
            if s.is_empty() || o.is_empty() {
                continue;
            }
            let score = r.gen_range(1..=5) as f64 / 5.0;
            preds.push(PredictionTriple::from_masks(id, i as u64 + 1, s, o, score).unwrap());
        }
    }
    (ds, preds)
}
