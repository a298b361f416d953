use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::BoundingBox;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("decoded box is degenerate or non-finite")]
    Degenerate,
}

/// Regression target relative to an anchor: center offsets scaled by the
/// anchor size and log size ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDelta {
    pub tx: f64,
    pub ty: f64,
    pub tw: f64,
    pub th: f64,
}

pub fn encode(b: &BoundingBox, anchor: &BoundingBox) -> BoxDelta {
    let (x, y) = b.center();
    let (xa, ya) = anchor.center();
    let (wa, ha) = (anchor.width(), anchor.height());
    BoxDelta {
        tx: (x - xa) / wa,
        ty: (y - ya) / ha,
        tw: (b.width() / wa).ln(),
        th: (b.height() / ha).ln(),
    }
}

pub fn decode(d: &BoxDelta, anchor: &BoundingBox) -> Result<BoundingBox, GeometryError> {
    let (xa, ya) = anchor.center();
    let (wa, ha) = (anchor.width(), anchor.height());
    let w = wa * d.tw.exp();
    let h = ha * d.th.exp();
    BoundingBox::from_center(xa + d.tx * wa, ya + d.ty * ha, w, h)
        .map_err(|_| GeometryError::Degenerate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn anchor_encodes_to_zero() {
        let a = BoundingBox::new(3., 4., 19., 30.).unwrap();
        assert_eq!(
            encode(&a, &a),
            BoxDelta { tx: 0., ty: 0., tw: 0., th: 0. }
        );
    }

    #[test]
    fn log_two_doubles_size() {
        let a = BoundingBox::new(10., 10., 30., 50.).unwrap();
        let l2 = std::f64::consts::LN_2;
        let b = decode(&BoxDelta { tx: 0., ty: 0., tw: l2, th: l2 }, &a).unwrap();
        assert_eq!(b.center(), a.center());
        assert!((b.width() - 40.0).abs() < 1e-12 && (b.height() - 80.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_decode_is_an_error() {
        let a = BoundingBox::new(0., 0., 1., 1.).unwrap();
        let d = BoxDelta { tx: 0., ty: 0., tw: -1e6, th: 0. };
        assert_eq!(decode(&d, &a), Err(GeometryError::Degenerate));
    }

    #[test]
    fn random_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..2000 {
            let mut rb = || {
                let x = rng.random_range(-100.0..100.0);
                let y = rng.random_range(-100.0..100.0);
                BoundingBox::new(x, y, x + rng.random_range(0.5..200.0), y + rng.random_range(0.5..200.0)).unwrap()
            };
            let (b, a) = (rb(), rb());
            let back = decode(&encode(&b, &a), &a).unwrap();
            for (u, v) in back.as_array().iter().zip(b.as_array()) {
                assert!((u - v).abs() < 1e-9);
            }
        }
    }
}
