//! Fold assignment before augmentation, so no source image leaks across a split.

use std::collections::BTreeMap;

use celldet::augment::{expand, Schedule};
use celldet::crossval::{build_split, partition};
use celldet::synthetic::{generate, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate(&SyntheticSpec::default())?.dataset;
    let folds = partition(&data, 5, 42)?;
    println!("fold sizes {:?}", folds.sizes());

    let schedule = Schedule::default();
    let augmented: BTreeMap<u32, _> = (1..=folds.n)
        .map(|j| Ok((j, expand(&folds.fold_dataset(&data, j), &schedule)?)))
        .collect::<Result<_, celldet::augment::AugmentError>>()?;

    for j in 1..=folds.n {
        let s = build_split(&folds, &augmented, j)?;
        println!(
            "split {j}: {} training / {} validation (ratio {}), shared sources: {}",
            s.training.len(),
            s.validation.len(),
            s.ratio(),
            s.shared_sources().len()
        );
    }
    let first = &augmented[&1].images[0];
    println!("first derived image {} from {}", first.record.image_id, first.variant.source_image_id);
    Ok(())
}
