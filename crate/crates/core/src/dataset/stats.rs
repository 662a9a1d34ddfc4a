use serde::Serialize;

use super::{Category, Dataset};

/// Instance-area proportions are histogrammed into this many equal bins
/// over `[0, 1]`; the last bin is closed.
pub const AREA_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub image_count: usize,
    pub pair_count: usize,
    pub shadow_count: usize,
    pub object_count: usize,
    pub mean_pairs_per_image: f64,
    /// `pairs_per_image[k]` = number of images with exactly `k` pairs.
    pub pairs_per_image: Vec<u64>,
    pub area_bin_edges: Vec<f64>,
    pub shadow_area_histogram: Vec<u64>,
    pub object_area_histogram: Vec<u64>,
}

fn area_bin(proportion: f64) -> usize {
    ((proportion * AREA_BINS as f64).floor() as usize).min(AREA_BINS - 1)
}

pub fn compute_stats(ds: &Dataset) -> DatasetStats {
    let per_image: Vec<usize> = ds
        .images()
        .iter()
        .map(|img| ds.associations_in(img.id).count())
        .collect();
    let max_pairs = per_image.iter().copied().max().unwrap_or(0);
    let mut pairs_per_image = vec![0u64; max_pairs + 1];
    for &k in &per_image {
        pairs_per_image[k] += 1;
    }
    let pair_count = ds.associations().len();

    let mut shadow_hist = vec![0u64; AREA_BINS];
    let mut object_hist = vec![0u64; AREA_BINS];
    let (mut shadows, mut objects) = (0, 0);
    for inst in ds.instances() {
        let img = ds.image(inst.image_id).expect("checked at load");
        let proportion = inst.mask.area() as f64 / (img.width as f64 * img.height as f64);
        match inst.category {
            Category::Shadow => {
                shadows += 1;
                shadow_hist[area_bin(proportion)] += 1;
            }
            Category::Object => {
                objects += 1;
                object_hist[area_bin(proportion)] += 1;
            }
        }
    }

    let image_count = ds.images().len();
    DatasetStats {
        image_count,
        pair_count,
        shadow_count: shadows,
        object_count: objects,
        mean_pairs_per_image: if image_count == 0 {
            0.0
        } else {
            pair_count as f64 / image_count as f64
        },
        pairs_per_image,
        area_bin_edges: (0..=AREA_BINS).map(|i| i as f64 / AREA_BINS as f64).collect(),
        shadow_area_histogram: shadow_hist,
        object_area_histogram: object_hist,
    }
}
