//! Anchor grid, box-delta coding, and proposal selection.

use celldet::geometry::{decode, encode, generate_anchors, iou, nms, top_proposals, AnchorConfig, ScoredBox};
use celldet::BoundingBox;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = AnchorConfig::default();
    let (fw, fh) = (38, 50);
    let anchors = generate_anchors(&cfg, fw, fh, fw * 16, fh * 16);
    println!("{fw}x{fh} feature map: {} anchors ({} per location)", anchors.len(), cfg.anchors_per_location());
    for a in &anchors[..cfg.anchors_per_location()] {
        println!("  {a}");
    }

    let gt = BoundingBox::new(100.0, 120.0, 180.0, 170.0)?;
    let best = anchors.iter().max_by(|a, b| iou(a, &gt).total_cmp(&iou(b, &gt))).unwrap();
    let d = encode(&gt, best);
    println!("best anchor {best} (IoU {:.3}) delta {d:?}", iou(best, &gt));
    println!("decoded back {}", decode(&d, best)?);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noisy: Vec<ScoredBox> = (0..2000)
        .map(|_| {
            let a = anchors[rng.random_range(0..anchors.len())];
            ScoredBox::new(a, rng.random(), None)
        })
        .collect();
    println!("nms(0.7) keeps {} of {}", nms(&noisy, 0.7).len(), noisy.len());
    println!("top_proposals keeps {}", top_proposals(&noisy, 300).len());
    Ok(())
}
