//! Otsu threshold, connected components, and area-based labels on a synthetic slide.

use celldet::detect::{blob_detect, histogram, otsu_threshold, BlobDetectorParams};
use celldet::eval::{evaluate_image, MatchMode};
use celldet::synthetic::{generate, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = generate(&SyntheticSpec { images: 1, objects: 12, seed: 8, ..Default::default() })?;
    let (rec, px) = (&s.dataset.images()[0], &s.pixels[0]);
    let gray = celldet::augment::to_grayscale(px);
    println!("{} {}x{}, Otsu level {}", rec.image_id, rec.width, rec.height, otsu_threshold(&histogram(&gray.to_u8()))?);

    let params = BlobDetectorParams::default();
    let dets = blob_detect(px, &params);
    let gt: Vec<_> = s.dataset.annotations_for(&rec.image_id).cloned().collect();
    for d in &dets {
        println!("  {} {:.2} {}", d.bbox, d.score, d.label.map_or("-", |c| c.as_str()));
    }
    let r = evaluate_image(&gt, &dets, 0.5, MatchMode::ClassAgnostic);
    println!("{}", r.to_table());
    Ok(())
}
