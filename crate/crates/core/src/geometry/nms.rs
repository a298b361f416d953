use std::cmp::Ordering;

use super::{iou, ScoredBox};

/// Proposals kept per image after suppression.
pub const DEFAULT_PROPOSAL_COUNT: usize = 300;

/// Overlap above which a lower-scored proposal is suppressed.
pub const DEFAULT_PROPOSAL_NMS_IOU: f64 = 0.7;

/// Total order used everywhere boxes are ranked: higher score first, then
/// lower ymin, lower xmin, lower ymax, lower xmax, label, and finally earlier
/// input position.
pub fn score_order(a: (usize, &ScoredBox), b: (usize, &ScoredBox)) -> Ordering {
    let (ia, a) = a;
    let (ib, b) = b;
    b.score
        .total_cmp(&a.score)
        .then(a.bbox.ymin().total_cmp(&b.bbox.ymin()))
        .then(a.bbox.xmin().total_cmp(&b.bbox.xmin()))
        .then(a.bbox.ymax().total_cmp(&b.bbox.ymax()))
        .then(a.bbox.xmax().total_cmp(&b.bbox.xmax()))
        .then(a.label.cmp(&b.label))
        .then(ia.cmp(&ib))
}

/// Greedy non-maximum suppression. A box is dropped when its IoU with an
/// already kept box exceeds `iou_threshold`. Output is in ranking order.
pub fn nms(candidates: &[ScoredBox], iou_threshold: f64) -> Vec<ScoredBox> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&i, &j| score_order((i, &candidates[i]), (j, &candidates[j])));
    let mut kept: Vec<ScoredBox> = Vec::new();
    for i in order {
        let c = &candidates[i];
        if kept.iter().all(|k| iou(&k.bbox, &c.bbox) <= iou_threshold) {
            kept.push(*c);
        }
    }
    kept
}

/// Suppresses at [`DEFAULT_PROPOSAL_NMS_IOU`] and keeps the `n` best.
pub fn top_proposals(candidates: &[ScoredBox], n: usize) -> Vec<ScoredBox> {
    select_proposals(candidates, n, DEFAULT_PROPOSAL_NMS_IOU)
}

pub fn select_proposals(candidates: &[ScoredBox], n: usize, nms_iou: f64) -> Vec<ScoredBox> {
    let mut kept = nms(candidates, nms_iou);
    kept.truncate(n);
    kept
}
