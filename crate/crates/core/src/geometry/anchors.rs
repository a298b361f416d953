use serde::{Deserialize, Serialize};

use crate::model::BoundingBox;

/// Sliding-window anchor layout. Aspect ratio is height / width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig {
    pub base_size: f64,
    pub scales: Vec<f64>,
    pub aspect_ratios: Vec<f64>,
    pub stride: f64,
}

impl Default for AnchorConfig {
    /// Scales 1/4, 1/2, 1, 2 and ratios 1/2, 1, 2 on a 256 px base with
    /// stride 16: twelve anchors per feature-map cell.
    fn default() -> Self {
        Self {
            base_size: 256.0,
            scales: vec![0.25, 0.5, 1.0, 2.0],
            aspect_ratios: vec![0.5, 1.0, 2.0],
            stride: 16.0,
        }
    }
}

impl AnchorConfig {
    pub fn anchors_per_location(&self) -> usize {
        self.scales.len() * self.aspect_ratios.len()
    }
}

/// One anchor per (scale, ratio) at every feature-map cell, row-major over
/// cells, scales outer and ratios inner. Anchors are not clipped to the image.
///
/// `image_w` / `image_h` do not affect the layout; they are accepted so
/// callers can pair the call with [`super::clip_to_image`].
pub fn generate_anchors(
    cfg: &AnchorConfig,
    feat_w: u32,
    feat_h: u32,
    _image_w: u32,
    _image_h: u32,
) -> Vec<BoundingBox> {
    let shapes: Vec<(f64, f64)> = cfg
        .scales
        .iter()
        .flat_map(|&s| {
            cfg.aspect_ratios.iter().map(move |&r| {
                let side = cfg.base_size * s;
                (side / r.sqrt(), side * r.sqrt())
            })
        })
        .collect();
    let mut out = Vec::with_capacity(feat_w as usize * feat_h as usize * shapes.len());
    for row in 0..feat_h {
        for col in 0..feat_w {
            let cx = (f64::from(col) + 0.5) * cfg.stride;
            let cy = (f64::from(row) + 0.5) * cfg.stride;
            for &(w, h) in &shapes {
                out.push(
                    BoundingBox::from_center(cx, cy, w, h)
                        .expect("anchor sizes are positive"),
                );
            }
        }
    }
    out
}
