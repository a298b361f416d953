use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DetectError;
use crate::geometry::ScoredBox;
use crate::model::{Annotation, BoundingBox, CellClass};

/// Controls how far the simulated detections stray from ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationParams {
    pub jitter_px: f64,
    pub class_corruption_rate: f64,
    pub drop_rate: f64,
    pub seed: u64,
}

impl Default for PerturbationParams {
    fn default() -> Self {
        Self::identity(0)
    }
}

impl PerturbationParams {
    /// No jitter, no corruption, no drops.
    pub fn identity(seed: u64) -> Self {
        Self {
            jitter_px: 0.0,
            class_corruption_rate: 0.0,
            drop_rate: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DetectError> {
        let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
        if !(self.jitter_px.is_finite() && self.jitter_px >= 0.0) {
            return Err(DetectError::Params(format!("jitter_px {} must be >= 0", self.jitter_px)));
        }
        if !rate_ok(self.class_corruption_rate) || !rate_ok(self.drop_rate) {
            return Err(DetectError::Params(format!(
                "rates must lie in [0, 1] (corruption {}, drop {})",
                self.class_corruption_rate, self.drop_rate
            )));
        }
        Ok(())
    }
}

/// Simulated detector built from ground truth.
///
/// Each annotation consumes exactly eight draws from a ChaCha8 stream seeded
/// with `p.seed` (drop, four corner offsets, corruption, replacement class,
/// score), so the output for a given annotation does not depend on whether
/// earlier ones were dropped. Boxes are clamped to the image; an axis that
/// would collapse keeps its original extent.
pub fn perturb_detect(
    gt: &[Annotation],
    width: u32,
    height: u32,
    p: &PerturbationParams,
) -> Vec<ScoredBox> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let (w, h) = (f64::from(width), f64::from(height));
    let mut out = Vec::with_capacity(gt.len());
    for a in gt {
        let drop = rng.random::<f64>();
        let mut offset = || {
            let u: f64 = rng.random();
            (2.0 * u - 1.0) * p.jitter_px
        };
        let d = [offset(), offset(), offset(), offset()];
        let corrupt = rng.random::<f64>();
        let replacement = rng.random_range(0..4usize);
        let score = 0.5 + 0.5 * rng.random::<f64>();
        if drop < p.drop_rate {
            continue;
        }
        let b = &a.bbox;
        let (x0, x1) = jitter_axis(b.xmin(), b.xmax(), d[0], d[2], w);
        let (y0, y1) = jitter_axis(b.ymin(), b.ymax(), d[1], d[3], h);
        let bbox = BoundingBox::new(x0, y0, x1, y1).expect("axes kept non-degenerate");
        let label = if corrupt < p.class_corruption_rate {
            let others: Vec<CellClass> = CellClass::ALL.into_iter().filter(|&c| c != a.label).collect();
            others[replacement]
        } else {
            a.label
        };
        out.push(ScoredBox::new(bbox, score, Some(label)));
    }
    out
}

fn jitter_axis(lo: f64, hi: f64, dlo: f64, dhi: f64, limit: f64) -> (f64, f64) {
    let (nlo, nhi) = ((lo + dlo).clamp(0.0, limit), (hi + dhi).clamp(0.0, limit));
    if nhi > nlo {
        (nlo, nhi)
    } else {
        (lo.clamp(0.0, limit), hi.clamp(0.0, limit))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt(n: usize) -> Vec<Annotation> {
        (0..n)
            .map(|i| {
                let x = (i % 20) as f64 * 10.0;
                let y = (i / 20 % 20) as f64 * 10.0;
                Annotation::new("img", BoundingBox::new(x, y, x + 8.0, y + 6.0).unwrap(), CellClass::from_index(i % 5).unwrap())
            })
            .collect()
    }

    #[test]
    fn identity_reproduces_ground_truth() {
        let g = gt(50);
        let d = perturb_detect(&g, 200, 200, &PerturbationParams::identity(3));
        assert_eq!(d.len(), 50);
        for (a, s) in g.iter().zip(&d) {
            assert_eq!(a.bbox, s.bbox);
            assert_eq!(Some(a.label), s.label);
            assert!((0.5..=1.0).contains(&s.score));
        }
    }

    #[test]
    fn full_drop_is_empty() {
        let p = PerturbationParams { drop_rate: 1.0, ..PerturbationParams::identity(1) };
        assert!(perturb_detect(&gt(30), 200, 200, &p).is_empty());
    }

    #[test]
    fn corruption_rate_is_binomial() {
        let g = gt(10_000);
        let p = PerturbationParams { class_corruption_rate: 0.3, ..PerturbationParams::identity(42) };
        let d = perturb_detect(&g, 200, 200, &p);
        let flips = g.iter().zip(&d).filter(|(a, s)| Some(a.label) != s.label).count() as f64;
        let n = 10_000.0;
        let sigma = (n * 0.3 * 0.7f64).sqrt();
        assert!((flips - 0.3 * n).abs() < 3.0 * sigma, "flips {flips}");
    }

    #[test]
    fn jitter_stays_in_bounds_and_is_deterministic() {
        let g = gt(100);
        let p = PerturbationParams { jitter_px: 15.0, ..PerturbationParams::identity(8) };
        let a = perturb_detect(&g, 200, 200, &p);
        assert_eq!(a, perturb_detect(&g, 200, 200, &p));
        for s in &a {
            assert!(s.bbox.within(200, 200));
        }
        // jitter below half the box size never collapses an axis, so every box moves
        let p = PerturbationParams { jitter_px: 2.5, ..PerturbationParams::identity(8) };
        let b = perturb_detect(&g, 200, 200, &p);
        assert!(g.iter().zip(&b).all(|(x, y)| x.bbox != y.bbox));
    }

    #[test]
    fn invalid_params() {
        assert!(PerturbationParams { drop_rate: 1.5, ..PerturbationParams::identity(0) }.validate().is_err());
        assert!(PerturbationParams { jitter_px: -1.0, ..PerturbationParams::identity(0) }.validate().is_err());
    }
}
