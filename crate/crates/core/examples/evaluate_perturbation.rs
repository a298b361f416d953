//! The perturbation oracle checks the harness: identity scores 1, corruption
//! rate p scores about 1 - p.

use celldet::detect::{DetectorSpec, Frame, PerturbationParams};
use celldet::eval::{aggregate, evaluate_image, EvaluationReport, MatchMode};
use celldet::synthetic::{generate, SyntheticDataset, SyntheticSpec};

/// Goes through the detector interface, which derives a separate random
/// stream for every image from the base seed.
fn run(s: &SyntheticDataset, p: &PerturbationParams) -> EvaluationReport {
    let detector = DetectorSpec::Perturb(*p).build().expect("valid parameters");
    let per_image: Vec<_> = s
        .dataset
        .images()
        .iter()
        .zip(&s.pixels)
        .map(|(img, px)| {
            let gt: Vec<_> = s.dataset.annotations_for(&img.image_id).cloned().collect();
            let det = detector.detect(&Frame { image_id: &img.image_id, image: px, ground_truth: &gt });
            evaluate_image(&gt, &det, 0.5, MatchMode::ClassAgnostic)
        })
        .collect();
    EvaluationReport::merge(0.5, &per_image)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = generate(&SyntheticSpec::default())?;
    for (name, p) in [
        ("identity", PerturbationParams::identity(1)),
        ("corrupt 0.2", PerturbationParams { class_corruption_rate: 0.2, ..PerturbationParams::identity(1) }),
        ("drop 0.1", PerturbationParams { drop_rate: 0.1, ..PerturbationParams::identity(1) }),
        ("jitter 3px", PerturbationParams { jitter_px: 3.0, ..PerturbationParams::identity(1) }),
    ] {
        let r = run(&ds, &p);
        println!("{name:<12} accuracy {:.3} ({}/{})", r.accuracy, r.correct, r.gt_total);
    }

    let corrupted = PerturbationParams { class_corruption_rate: 0.2, ..PerturbationParams::identity(1) };
    println!("\n{}", run(&ds, &corrupted).to_table());

    let folds: Vec<_> = (0..5u64)
        .map(|seed| run(&ds, &PerturbationParams { seed, ..corrupted }))
        .collect();
    println!("over 5 seeds: {}", aggregate(&folds)?.summary());
    Ok(())
}
