//! Region-proposal geometry: anchors, overlap, box regression, NMS and
//! proposal selection.

mod anchors;
mod delta;
mod nms;

pub use anchors::{generate_anchors, AnchorConfig};
pub use delta::{decode, encode, BoxDelta, GeometryError};
pub use nms::{
    nms, score_order, select_proposals, top_proposals, DEFAULT_PROPOSAL_COUNT, DEFAULT_PROPOSAL_NMS_IOU,
};

use serde::{Deserialize, Serialize};

use crate::model::{BoundingBox, CellClass};

/// A candidate or detected region with a confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<CellClass>,
}

impl ScoredBox {
    /// Score is clamped into `[0, 1]`; NaN becomes 0.
    pub fn new(bbox: BoundingBox, score: f64, label: Option<CellClass>) -> Self {
        let score = if score.is_nan() { 0.0 } else { score.clamp(0.0, 1.0) };
        Self { bbox, score, label }
    }
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    match a.intersect(b) {
        None => 0.0,
        Some(i) => {
            let inter = i.area();
            inter / (a.area() + b.area() - inter)
        }
    }
}

/// Intersection with the image frame `(0, 0, w, h)`; `None` when fully outside.
pub fn clip_to_image(b: &BoundingBox, w: u32, h: u32) -> Option<BoundingBox> {
    BoundingBox::full(w, h).ok()?.intersect(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(a: f64, b: f64, c: f64, d: f64) -> BoundingBox {
        BoundingBox::new(a, b, c, d).unwrap()
    }

    /// Counts unit cells covered by both / either box on the integer grid.
    fn pixel_iou(a: [i32; 4], b: [i32; 4]) -> f64 {
        let inside = |r: [i32; 4], x: i32, y: i32| x >= r[0] && x < r[2] && y >= r[1] && y < r[3];
        let (mut inter, mut union) = (0u32, 0u32);
        for y in -5..45 {
            for x in -5..45 {
                let (ia, ib) = (inside(a, x, y), inside(b, x, y));
                inter += u32::from(ia && ib);
                union += u32::from(ia || ib);
            }
        }
        f64::from(inter) / f64::from(union)
    }

    #[test]
    fn iou_examples() {
        let a = bx(0., 0., 10., 10.);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bx(20., 20., 30., 30.)), 0.0);
        assert!((iou(&a, &bx(5., 0., 15., 10.)) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(pixel_iou([0, 0, 10, 10], [5, 0, 15, 10]), 1.0 / 3.0);
    }

    #[test]
    fn clip_examples() {
        let inner = bx(10., 10., 20., 20.);
        assert_eq!(clip_to_image(&inner, 100, 100), Some(inner));
        assert_eq!(clip_to_image(&bx(-10., -10., 5., 5.), 100, 100), Some(bx(0., 0., 5., 5.)));
        assert_eq!(clip_to_image(&bx(-10., -10., -1., -1.), 100, 100), None);
    }

    #[test]
    fn scores_are_clamped() {
        let b = bx(0., 0., 1., 1.);
        assert_eq!(ScoredBox::new(b, 1.7, None).score, 1.0);
        assert_eq!(ScoredBox::new(b, f64::NAN, None).score, 0.0);
    }

    fn int_box() -> impl Strategy<Value = [i32; 4]> {
        (0..30i32, 0..30i32, 1..12i32, 1..12i32).prop_map(|(x, y, w, h)| [x, y, x + w, y + h])
    }

    proptest! {
        #[test]
        fn iou_agrees_with_pixel_count(a in int_box(), b in int_box()) {
            let fa = bx(a[0].into(), a[1].into(), a[2].into(), a[3].into());
            let fb = bx(b[0].into(), b[1].into(), b[2].into(), b[3].into());
            let v = iou(&fa, &fb);
            prop_assert!((v - pixel_iou(a, b)).abs() < 1e-12);
            prop_assert_eq!(v, iou(&fb, &fa));
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
