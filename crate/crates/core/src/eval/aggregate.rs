use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::report::EvaluationReport;

#[derive(Debug, Error, PartialEq)]
pub enum AggregateError {
    #[error("no fold reports to aggregate")]
    Empty,
}

/// Accuracy across folds as mean ± sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAggregate {
    pub per_fold_accuracy: Vec<f64>,
    pub mean: f64,
    /// n − 1 denominator; reported as 0 for a single fold.
    pub std: f64,
    /// False when only one fold was given.
    pub std_defined: bool,
}

impl FoldAggregate {
    pub fn from_accuracies(acc: &[f64]) -> Result<Self, AggregateError> {
        if acc.is_empty() {
            return Err(AggregateError::Empty);
        }
        let n = acc.len() as f64;
        // sort so the floating-point sums do not depend on fold order
        let mut sorted = acc.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / n;
        let (std, std_defined) = if acc.len() < 2 {
            (0.0, false)
        } else {
            let ss: f64 = sorted.iter().map(|a| (a - mean) * (a - mean)).sum();
            ((ss / (n - 1.0)).sqrt(), true)
        };
        Ok(Self {
            per_fold_accuracy: acc.to_vec(),
            mean,
            std,
            std_defined,
        })
    }

    /// `"0.975 ± 0.011"`
    pub fn summary(&self) -> String {
        format!("{:.3} ± {:.3}", self.mean, self.std)
    }
}

impl fmt::Display for FoldAggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.summary())
    }
}

pub fn aggregate(reports: &[EvaluationReport]) -> Result<FoldAggregate, AggregateError> {
    let acc: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    FoldAggregate::from_accuracies(&acc)
}
