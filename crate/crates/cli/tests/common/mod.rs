#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use soba_core::dataset::{AssociationRecord, Category, Dataset, ImageRecord, InstanceAnnotation};
use soba_core::mask::{mask_to_box, BitMask, RleMask};

pub const W: u32 = 64;
pub const H: u32 = 48;

pub fn soba(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soba"))
        .args(args)
        .output()
        .expect("spawn soba")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Object rectangle at `(x, y)` with its shadow cast below and to the right.
fn pair_masks(x: i64, y: i64) -> (BitMask, BitMask) {
    let object = BitMask::rect(W, H, x, y, 6, 10);
    let shadow = BitMask::rect(W, H, x + 2, y + 10, 9, 3);
    (shadow, object)
}

fn positions(image: u64) -> Vec<(i64, i64)> {
    let k = (image % 3) as i64;
    let mut v = vec![(4 + k, 6), (36 - k, 22)];
    if image.is_multiple_of(2) {
        v.push((22, 4 + k));
    }
    v
}

/// Writes `images` synthetic photos plus `manifest.json` into `dir`.
pub fn fixture(dir: &Path, images: u64) -> PathBuf {
    let mut image_recs = Vec::new();
    let mut instances = Vec::new();
    let mut associations = Vec::new();
    let (mut inst_id, mut assoc_id) = (0, 0);
    for img in 1..=images {
        let file_name = format!("img{img:03}.png");
        let mut pixels = image::RgbImage::from_fn(W, H, |x, y| {
            image::Rgb([(120 + x) as u8, (140 + y) as u8, (90 + (x * y) % 50) as u8])
        });
        for (x, y) in positions(img) {
            let (shadow, object) = pair_masks(x, y);
            for (r, c) in shadow.iter_set() {
                let px = pixels.get_pixel_mut(c, r);
                px.0 = px.0.map(|v| v / 3);
            }
            for (r, c) in object.iter_set() {
                pixels.put_pixel(c, r, image::Rgb([200, (30 * img % 255) as u8, 40]));
            }
            assoc_id += 1;
            let (sid, oid) = (inst_id + 1, inst_id + 2);
            inst_id += 2;
            for (id, category, m) in [(sid, Category::Shadow, &shadow), (oid, Category::Object, &object)] {
                instances.push(InstanceAnnotation {
                    id,
                    image_id: img,
                    category,
                    mask: RleMask::encode(m),
                    bbox: mask_to_box(m).unwrap(),
                    association_id: Some(assoc_id),
                    score: None,
                });
            }
            let union = shadow.union(&object).unwrap();
            associations.push(AssociationRecord {
                id: assoc_id,
                image_id: img,
                shadow_id: sid,
                object_id: oid,
                mask: RleMask::encode(&union),
                bbox: mask_to_box(&union).unwrap(),
                score: None,
            });
        }
        pixels.save(dir.join(&file_name)).unwrap();
        image_recs.push(ImageRecord {
            id: img,
            file_name,
            width: W,
            height: H,
        });
    }
    let ds = Dataset::new(image_recs, instances, associations).unwrap();
    let path = dir.join("manifest.json");
    std::fs::write(&path, ds.to_json()).unwrap();
    path
}
