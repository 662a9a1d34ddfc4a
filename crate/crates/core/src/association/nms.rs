use super::RawDetection;
use crate::dataset::Category;
use crate::mask::{mask_iou, BitMask};

/// Mask NMS within each category.
///
/// Detections are swept in descending score (ties by ascending id); one is
/// suppressed when its binarized main mask has IoU `>= iou_threshold` with
/// an already kept detection of the same category. Returns the indices of
/// the survivors in ascending input order.
pub fn mask_nms(dets: &[RawDetection], iou_threshold: f64, binarize: f64) -> Vec<usize> {
    let masks: Vec<BitMask> = dets.iter().map(|d| d.main_mask.binarize(binarize)).collect();
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(dets[a].id.cmp(&dets[b].id))
    });
    let mut kept: Vec<usize> = Vec::new();
    for cat in [Category::Shadow, Category::Object] {
        let mut survivors: Vec<usize> = Vec::new();
        for &i in order.iter().filter(|&&i| dets[i].category == cat) {
            let suppressed = survivors
                .iter()
                .any(|&k| mask_iou(&masks[i], &masks[k]).is_ok_and(|iou| iou >= iou_threshold));
            if !suppressed {
                survivors.push(i);
            }
        }
        kept.extend(survivors);
    }
    kept.sort_unstable();
    kept
}
