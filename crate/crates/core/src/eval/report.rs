use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::matching::MatchResult;
use crate::geometry::ScoredBox;
use crate::model::{Annotation, CellClass};

/// Row/column index of the background entry in the confusion matrix.
pub const BACKGROUND: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub gt_count: u64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// Matched with the wrong label.
    pub class_confusions: u64,
    pub precision: f64,
    pub recall: f64,
}

/// Metrics for one or more images.
///
/// Everything is derived from the 6x6 confusion matrix: rows are ground-truth
/// classes, columns predicted classes, index 5 is background. A missed object
/// lands in its row's background column, a false alarm in the background row
/// under its predicted class. A matched detection without a label counts as a
/// miss; an unmatched one is tallied at background/background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub iou_threshold: f64,
    pub gt_total: u64,
    pub correct: u64,
    /// Correct-class matches over ground-truth objects (1 when there are none).
    pub accuracy: f64,
    pub per_class: BTreeMap<CellClass, ClassStats>,
    pub confusion_matrix: [[u64; 6]; 6],
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

impl EvaluationReport {
    pub fn from_confusion(confusion_matrix: [[u64; 6]; 6], iou_threshold: f64) -> Self {
        let m = &confusion_matrix;
        let mut per_class = BTreeMap::new();
        let mut gt_total = 0;
        let mut correct = 0;
        for c in CellClass::ALL {
            let i = c.index();
            let row: u64 = m[i].iter().sum();
            let col: u64 = (0..6).map(|r| m[r][i]).sum();
            let tp = m[i][i];
            gt_total += row;
            correct += tp;
            per_class.insert(
                c,
                ClassStats {
                    gt_count: row,
                    tp,
                    fp: col - tp,
                    fn_: row - tp,
                    class_confusions: row - tp - m[i][BACKGROUND],
                    precision: ratio(tp, col),
                    recall: ratio(tp, row),
                },
            );
        }
        Self {
            iou_threshold,
            gt_total,
            correct,
            accuracy: ratio(correct, gt_total),
            per_class,
            confusion_matrix,
        }
    }

    /// Sums the confusion matrices of several reports.
    ///
    /// # Panics
    /// If the reports were produced at different IoU thresholds.
    pub fn merge<'a>(iou_threshold: f64, reports: impl IntoIterator<Item = &'a EvaluationReport>) -> Self {
        let mut m = [[0u64; 6]; 6];
        for r in reports {
            assert_eq!(r.iou_threshold, iou_threshold, "merging reports with different IoU thresholds");
            for (row, src) in m.iter_mut().zip(&r.confusion_matrix) {
                for (v, s) in row.iter_mut().zip(src) {
                    *v += s;
                }
            }
        }
        Self::from_confusion(m, iou_threshold)
    }

    /// Fixed-width text table for terminals and logs.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "accuracy {:.3} ({} / {} objects, IoU >= {})",
            self.accuracy, self.correct, self.gt_total, self.iou_threshold
        );
        let _ = writeln!(
            s,
            "{:<20} {:>6} {:>6} {:>6} {:>6} {:>6} {:>9} {:>7}",
            "class", "gt", "tp", "fp", "fn", "conf", "precision", "recall"
        );
        for (c, st) in &self.per_class {
            let _ = writeln!(
                s,
                "{:<20} {:>6} {:>6} {:>6} {:>6} {:>6} {:>9.3} {:>7.3}",
                c.as_str(),
                st.gt_count,
                st.tp,
                st.fp,
                st.fn_,
                st.class_confusions,
                st.precision,
                st.recall
            );
        }
        let _ = writeln!(s, "confusion (rows: truth, cols: predicted; last = background)");
        for row in &self.confusion_matrix {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>6}")).collect();
            let _ = writeln!(s, "{}", cells.join(""));
        }
        s
    }
}

/// Scores one image's match result.
pub fn score(m: &MatchResult, gt: &[Annotation], det: &[ScoredBox]) -> EvaluationReport {
    let mut cm = [[0u64; 6]; 6];
    for p in &m.pairs {
        let row = gt[p.gt].label.index();
        let col = det[p.det].label.map_or(BACKGROUND, CellClass::index);
        cm[row][col] += 1;
    }
    for &g in &m.unmatched_gt {
        cm[gt[g].label.index()][BACKGROUND] += 1;
    }
    for &d in &m.unmatched_det {
        let col = det[d].label.map_or(BACKGROUND, CellClass::index);
        cm[BACKGROUND][col] += 1;
    }
    EvaluationReport::from_confusion(cm, m.iou_threshold)
}
