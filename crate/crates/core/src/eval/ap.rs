//! COCO-style 101-point interpolated average precision.

use std::cmp::Ordering;

use serde::Serialize;

pub const RECALL_POINTS: usize = 101;

/// One scored prediction after matching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredLabel {
    pub score: f64,
    /// Secondary sort key for equal scores (ascending).
    pub id: u64,
    pub image_id: u64,
    pub true_positive: bool,
}

/// Descending score, then ascending id, then ascending image id.
pub fn rank_order(a: &ScoredLabel, b: &ScoredLabel) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then(a.id.cmp(&b.id))
        .then(a.image_id.cmp(&b.image_id))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrCurve {
    /// AP in `[0, 100]`.
    pub ap: f64,
    /// Interpolated precision at recall `i / 100`, `i = 0..=100`.
    pub precision: Vec<f64>,
    /// Highest recall reached.
    pub max_recall: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub gt_count: usize,
}

/// AP at the 101 recall points, or `None` when there is no ground truth
/// (such categories/thresholds are left out of averages).
pub fn average_precision(labels: &[ScoredLabel], gt_count: usize) -> Option<f64> {
    pr_curve(labels, gt_count).map(|c| c.ap)
}

pub fn pr_curve(labels: &[ScoredLabel], gt_count: usize) -> Option<PrCurve> {
    if gt_count == 0 {
        return None;
    }
    let mut sorted = labels.to_vec();
    sorted.sort_by(rank_order);

    let mut precision = Vec::with_capacity(sorted.len());
    let mut recall = Vec::with_capacity(sorted.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for l in &sorted {
        if l.true_positive {
            tp += 1;
        } else {
            fp += 1;
        }
        precision.push(tp as f64 / (tp + fp) as f64);
        recall.push(tp as f64 / gt_count as f64);
    }
    // Monotone non-increasing envelope.
    for i in (1..precision.len()).rev() {
        if precision[i - 1] < precision[i] {
            precision[i - 1] = precision[i];
        }
    }
    let sampled: Vec<f64> = (0..RECALL_POINTS)
        .map(|i| {
            let r = i as f64 / (RECALL_POINTS - 1) as f64;
            let idx = recall.partition_point(|&x| x < r);
            precision.get(idx).copied().unwrap_or(0.0)
        })
        .collect();
    let ap = 100.0 * sampled.iter().sum::<f64>() / RECALL_POINTS as f64;
    Some(PrCurve {
        ap,
        precision: sampled,
        max_recall: recall.last().copied().unwrap_or(0.0),
        true_positives: tp,
        false_positives: fp,
        gt_count,
    })
}
