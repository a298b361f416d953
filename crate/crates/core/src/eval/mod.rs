//! Detection evaluation: greedy IoU matching, confusion-matrix scoring and
//! cross-fold aggregation.

mod aggregate;
mod matching;
mod report;

pub use aggregate::{aggregate, AggregateError, FoldAggregate};
pub use matching::{
    match_detections, match_with, MatchMode, MatchPair, MatchResult, DEFAULT_IOU_THRESHOLD,
};
pub use report::{score, ClassStats, EvaluationReport, BACKGROUND};

use crate::geometry::ScoredBox;
use crate::model::Annotation;

/// Match and score one image.
pub fn evaluate_image(
    gt: &[Annotation],
    det: &[ScoredBox],
    iou_threshold: f64,
    mode: MatchMode,
) -> EvaluationReport {
    let m = match_with(gt, det, iou_threshold, mode);
    score(&m, gt, det)
}
