//! Seeded n-fold partition by source image and leak-free training/validation
//! splits over the augmented folds.
//!
//! Folds are numbered from 1. Augmentation happens per fold, so every derived
//! image stays on the same side of a split as its source.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::AugmentedFold;
use crate::model::{CellClass, Dataset};

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("fold count must be at least 2, got {0}")]
    TooFewFolds(u32),
    #[error("cannot split {images} images into {folds} folds")]
    TooManyFolds { folds: u32, images: usize },
    #[error("fold index {j} outside 1..={n}")]
    FoldIndex { j: u32, n: u32 },
    #[error("no augmented data for fold {0}")]
    MissingFold(u32),
    #[error("augmented fold {fold} contains source image {image_id:?} assigned to fold {assigned:?}")]
    FoldMismatch {
        fold: u32,
        image_id: String,
        assigned: Option<u32>,
    },
}

/// How images are grouped before the round-robin deal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratify {
    #[default]
    None,
    /// Group by each image's most frequent class so classes spread evenly.
    DominantClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub n: u32,
    pub seed: u64,
    #[serde(default)]
    pub stratify: Stratify,
    /// image id → fold index in `1..=n`
    pub assignment: BTreeMap<String, u32>,
}

impl FoldAssignment {
    pub fn fold_of(&self, image_id: &str) -> Option<u32> {
        self.assignment.get(image_id).copied()
    }

    /// Image ids of fold `i`, sorted.
    pub fn members(&self, i: u32) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == i)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        (1..=self.n).map(|i| self.members(i).len()).collect()
    }

    /// The source images of fold `i` as a dataset.
    pub fn fold_dataset(&self, d: &Dataset, i: u32) -> Dataset {
        d.subset(self.members(i))
    }
}

pub fn partition(d: &Dataset, n: u32, seed: u64) -> Result<FoldAssignment, SplitError> {
    partition_with(d, n, seed, Stratify::None)
}

/// Shuffles image ids with a seeded ChaCha8 stream and deals them
/// round-robin, so fold sizes differ by at most one.
pub fn partition_with(
    d: &Dataset,
    n: u32,
    seed: u64,
    stratify: Stratify,
) -> Result<FoldAssignment, SplitError> {
    if n < 2 {
        return Err(SplitError::TooFewFolds(n));
    }
    if (n as usize) > d.images().len() {
        return Err(SplitError::TooManyFolds {
            folds: n,
            images: d.images().len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order: Vec<&str> = match stratify {
        Stratify::None => {
            let mut ids: Vec<&str> = d.images().iter().map(|i| i.image_id.as_str()).collect();
            ids.shuffle(&mut rng);
            ids
        }
        Stratify::DominantClass => {
            let mut strata: BTreeMap<Option<CellClass>, Vec<&str>> = BTreeMap::new();
            for img in d.images() {
                strata
                    .entry(dominant_class(d, &img.image_id))
                    .or_default()
                    .push(img.image_id.as_str());
            }
            strata
                .into_values()
                .flat_map(|mut ids| {
                    ids.shuffle(&mut rng);
                    ids
                })
                .collect()
        }
    };
    let assignment = order
        .into_iter()
        .enumerate()
        .map(|(k, id)| (id.to_string(), (k as u32 % n) + 1))
        .collect();
    Ok(FoldAssignment {
        n,
        seed,
        stratify,
        assignment,
    })
}

/// Most frequent label in an image; ties go to the earlier class.
fn dominant_class(d: &Dataset, image_id: &str) -> Option<CellClass> {
    let mut counts = [0usize; 5];
    for a in d.annotations_for(image_id) {
        counts[a.label.index()] += 1;
    }
    let best = *counts.iter().max()?;
    if best == 0 {
        return None;
    }
    counts
        .iter()
        .position(|&c| c == best)
        .and_then(CellClass::from_index)
}

/// Training set `B_j` (union of all other augmented folds) and validation
/// set `Ā_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub j: u32,
    pub training: AugmentedFold,
    pub validation: AugmentedFold,
}

impl Split {
    /// Source ids present on both sides; empty for a correct split.
    pub fn shared_sources(&self) -> BTreeSet<String> {
        let train = self.training.source_ids();
        self.validation
            .source_ids()
            .into_iter()
            .filter(|s| train.contains(s))
            .map(str::to_string)
            .collect()
    }

    pub fn ratio(&self) -> f64 {
        self.training.len() as f64 / self.validation.len() as f64
    }
}

pub fn build_split(
    folds: &FoldAssignment,
    augmented: &BTreeMap<u32, AugmentedFold>,
    j: u32,
) -> Result<Split, SplitError> {
    if j < 1 || j > folds.n {
        return Err(SplitError::FoldIndex { j, n: folds.n });
    }
    for i in 1..=folds.n {
        let fold = augmented.get(&i).ok_or(SplitError::MissingFold(i))?;
        for src in fold.source_ids() {
            let assigned = folds.fold_of(src);
            if assigned != Some(i) {
                return Err(SplitError::FoldMismatch {
                    fold: i,
                    image_id: src.to_string(),
                    assigned,
                });
            }
        }
    }
    let training = AugmentedFold::concat((1..=folds.n).filter(|&i| i != j).map(|i| &augmented[&i]));
    Ok(Split {
        j,
        training,
        validation: augmented[&j].clone(),
    })
}
