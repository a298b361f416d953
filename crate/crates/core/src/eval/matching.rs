use serde::{Deserialize, Serialize};

use crate::geometry::{iou, score_order, ScoredBox};
use crate::model::Annotation;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Boxes match regardless of label; label agreement is scored afterwards.
    #[default]
    ClassAgnostic,
    /// A detection may only match ground truth of its own class.
    PerClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub gt: usize,
    pub det: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// In the order detections were considered (best-ranked first).
    pub pairs: Vec<MatchPair>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_det: Vec<usize>,
    pub iou_threshold: f64,
}

/// Class-agnostic greedy matching; see [`match_with`].
pub fn match_detections(gt: &[Annotation], det: &[ScoredBox], iou_threshold: f64) -> MatchResult {
    match_with(gt, det, iou_threshold, MatchMode::ClassAgnostic)
}

/// Detections are visited in ranking order (score, then position, as in
/// NMS). Each takes the still-unmatched ground-truth box with the highest
/// IoU, provided it reaches `iou_threshold`; equal IoUs go to the lower
/// ground-truth index.
pub fn match_with(
    gt: &[Annotation],
    det: &[ScoredBox],
    iou_threshold: f64,
    mode: MatchMode,
) -> MatchResult {
    let mut order: Vec<usize> = (0..det.len()).collect();
    order.sort_by(|&i, &j| score_order((i, &det[i]), (j, &det[j])));

    let mut gt_taken = vec![false; gt.len()];
    let mut pairs = Vec::new();
    let mut unmatched_det = Vec::new();
    for d in order {
        let mut best: Option<(usize, f64)> = None;
        for (g, a) in gt.iter().enumerate() {
            if gt_taken[g] {
                continue;
            }
            if mode == MatchMode::PerClass && det[d].label != Some(a.label) {
                continue;
            }
            let v = iou(&a.bbox, &det[d].bbox);
            if v >= iou_threshold && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        match best {
            Some((g, v)) => {
                gt_taken[g] = true;
                pairs.push(MatchPair { gt: g, det: d, iou: v });
            }
            None => unmatched_det.push(d),
        }
    }
    unmatched_det.sort_unstable();
    MatchResult {
        pairs,
        unmatched_gt: (0..gt.len()).filter(|&g| !gt_taken[g]).collect(),
        unmatched_det,
        iou_threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundingBox, CellClass};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ann(x: f64, y: f64, w: f64, h: f64) -> Annotation {
        Annotation::new("i", BoundingBox::new(x, y, x + w, y + h).unwrap(), CellClass::Artifact)
    }

    #[test]
    fn exact_detections_match_everything() {
        let gt = vec![ann(0., 0., 10., 10.), ann(20., 20., 5., 5.)];
        let det: Vec<ScoredBox> = gt.iter().map(|a| ScoredBox::new(a.bbox, 0.9, Some(a.label))).collect();
        let m = match_detections(&gt, &det, 0.5);
        assert_eq!(m.pairs.len(), 2);
        assert!(m.unmatched_gt.is_empty() && m.unmatched_det.is_empty());
    }

    #[test]
    fn no_detections() {
        let gt = vec![ann(0., 0., 10., 10.), ann(20., 20., 5., 5.)];
        let m = match_detections(&gt, &[], 0.5);
        assert_eq!(m.unmatched_gt, vec![0, 1]);
    }

    #[test]
    fn higher_score_claims_first() {
        let gt = vec![ann(0., 0., 10., 10.)];
        let det = vec![
            ScoredBox::new(BoundingBox::new(0., 0., 10., 10.).unwrap(), 0.4, None),
            ScoredBox::new(BoundingBox::new(1., 0., 11., 10.).unwrap(), 0.8, None),
        ];
        let m = match_detections(&gt, &det, 0.5);
        assert_eq!(m.pairs[0].det, 1);
        assert_eq!(m.unmatched_det, vec![0]);
    }

    #[test]
    fn per_class_mode_requires_label_agreement() {
        let gt = vec![ann(0., 0., 10., 10.)];
        let det = vec![ScoredBox::new(gt[0].bbox, 0.9, Some(CellClass::CancerCluster))];
        assert_eq!(match_with(&gt, &det, 0.5, MatchMode::PerClass).pairs.len(), 0);
        assert_eq!(match_with(&gt, &det, 0.5, MatchMode::ClassAgnostic).pairs.len(), 1);
    }

    /// Greedy matching is the lexicographic maximum of the per-detection IoU
    /// vector (in ranking order) over all admissible partial assignments.
    fn brute_force(gt: &[Annotation], det: &[ScoredBox], t: f64) -> Vec<Option<usize>> {
        let mut order: Vec<usize> = (0..det.len()).collect();
        order.sort_by(|&i, &j| det[j].score.total_cmp(&det[i].score).then(i.cmp(&j)));
        let admissible: Vec<Vec<(usize, f64)>> = order
            .iter()
            .map(|&d| {
                gt.iter()
                    .enumerate()
                    .map(|(g, a)| (g, iou(&a.bbox, &det[d].bbox)))
                    .filter(|&(_, v)| v >= t)
                    .collect()
            })
            .collect();
        let mut best: Option<(Vec<f64>, Vec<Option<usize>>)> = None;
        let mut cur_v = Vec::new();
        let mut cur_a = Vec::new();
        let mut used = vec![false; gt.len()];
        #[allow(clippy::too_many_arguments)]
        fn rec(
            k: usize,
            adm: &[Vec<(usize, f64)>],
            used: &mut Vec<bool>,
            cur_v: &mut Vec<f64>,
            cur_a: &mut Vec<Option<usize>>,
            best: &mut Option<(Vec<f64>, Vec<Option<usize>>)>,
        ) {
            if k == adm.len() {
                let better = match best {
                    None => true,
                    Some((bv, _)) => cur_v.iter().zip(bv.iter()).find(|(a, b)| a != b).is_some_and(|(a, b)| a > b),
                };
                if better {
                    *best = Some((cur_v.clone(), cur_a.clone()));
                }
                return;
            }
            for &(g, v) in &adm[k] {
                if !used[g] {
                    used[g] = true;
                    cur_v.push(v);
                    cur_a.push(Some(g));
                    rec(k + 1, adm, used, cur_v, cur_a, best);
                    cur_v.pop();
                    cur_a.pop();
                    used[g] = false;
                }
            }
            cur_v.push(-1.0);
            cur_a.push(None);
            rec(k + 1, adm, used, cur_v, cur_a, best);
            cur_v.pop();
            cur_a.pop();
        }
        rec(0, &admissible, &mut used, &mut cur_v, &mut cur_a, &mut best);
        let assigned = best.unwrap().1;
        let mut by_det = vec![None; det.len()];
        for (k, &d) in order.iter().enumerate() {
            by_det[d] = assigned[k];
        }
        by_det
    }

    #[test]
    fn greedy_equals_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..40 {
            // boxes jittered around a few centers so that many pairs overlap
            let centers: Vec<(f64, f64)> = (0..4).map(|_| (rng.random_range(10.0..40.0), rng.random_range(10.0..40.0))).collect();
            let sample = |rng: &mut ChaCha8Rng| {
                let (cx, cy) = centers[rng.random_range(0..centers.len())];
                let x = cx + rng.random_range(-3.0..3.0);
                let y = cy + rng.random_range(-3.0..3.0);
                BoundingBox::new(x, y, x + rng.random_range(6.0..12.0), y + rng.random_range(6.0..12.0)).unwrap()
            };
            let gt: Vec<Annotation> = (0..8).map(|_| Annotation::new("i", sample(&mut rng), CellClass::Artifact)).collect();
            let det: Vec<ScoredBox> = (0..10).map(|_| ScoredBox::new(sample(&mut rng), rng.random(), None)).collect();
            let m = match_detections(&gt, &det, 0.3);
            let mut greedy = vec![None; det.len()];
            for p in &m.pairs {
                greedy[p.det] = Some(p.gt);
            }
            assert_eq!(greedy, brute_force(&gt, &det, 0.3));
        }
    }
}
