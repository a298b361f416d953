use serde::{Deserialize, Serialize};

use super::components::{connected_components, BinaryMask};
use super::otsu::{histogram, otsu_threshold};
use super::DetectError;
use crate::augment::to_grayscale;
use crate::geometry::ScoredBox;
use crate::model::CellClass;
use crate::raster::{quantize, ImageBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "level")]
pub enum ThresholdMode {
    Otsu,
    /// Foreground/background split at this 8-bit code.
    Fixed(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Foreground codes are `<= level`.
    DarkOnLight,
    /// Foreground codes are `> level`.
    LightOnDark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlobDetectorParams {
    pub threshold_mode: ThresholdMode,
    pub min_area_px: u32,
    pub cluster_area_px: u32,
    pub polarity: Polarity,
    pub single_class: CellClass,
    pub cluster_class: CellClass,
}

impl Default for BlobDetectorParams {
    fn default() -> Self {
        Self {
            threshold_mode: ThresholdMode::Otsu,
            min_area_px: 12,
            cluster_area_px: 90,
            polarity: Polarity::DarkOnLight,
            single_class: CellClass::SingleCancerCell,
            cluster_class: CellClass::CancerCluster,
        }
    }
}

impl BlobDetectorParams {
    pub fn validate(&self) -> Result<(), DetectError> {
        if self.min_area_px == 0 || self.min_area_px >= self.cluster_area_px {
            return Err(DetectError::Params(format!(
                "need 0 < min_area_px ({}) < cluster_area_px ({})",
                self.min_area_px, self.cluster_area_px
            )));
        }
        Ok(())
    }
}

/// Threshold → 8-connected components → tight boxes, labeled by size.
///
/// Scores are a size heuristic, `min(1, area / (2 * cluster_area_px))`, and
/// only meaningful for ranking.
pub fn blob_detect(img: &ImageBuffer, p: &BlobDetectorParams) -> Vec<ScoredBox> {
    let gray = to_grayscale(img);
    let codes: Vec<u8> = gray.data().iter().map(|&v| quantize(v)).collect();
    let level = match p.threshold_mode {
        ThresholdMode::Fixed(level) => level,
        ThresholdMode::Otsu => {
            let h = histogram(&codes);
            if h.iter().filter(|&&c| c > 0).count() < 2 {
                // flat image: nothing to separate
                return Vec::new();
            }
            otsu_threshold(&h).expect("image is non-empty")
        }
    };
    let mask = BinaryMask::new(
        gray.width(),
        gray.height(),
        codes
            .iter()
            .map(|&c| match p.polarity {
                Polarity::DarkOnLight => c <= level,
                Polarity::LightOnDark => c > level,
            })
            .collect(),
    );
    connected_components(&mask)
        .into_iter()
        .filter(|c| c.area() >= p.min_area_px as usize)
        .map(|c| {
            let area = c.area() as f64;
            let cluster = f64::from(p.cluster_area_px);
            let label = if area < cluster {
                p.single_class
            } else {
                p.cluster_class
            };
            ScoredBox::new(c.bbox(), (area / (2.0 * cluster)).min(1.0), Some(label))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BoundingBox;

    fn canvas(w: u32, h: u32, squares: &[(u32, u32, u32, u32)]) -> ImageBuffer {
        ImageBuffer::from_fn(w, h, 1, |x, y, _| {
            let dark = squares
                .iter()
                .any(|&(x0, y0, sw, sh)| x >= x0 && x < x0 + sw && y >= y0 && y < y0 + sh);
            if dark { 0.1 } else { 1.0 }
        })
        .unwrap()
    }

    #[test]
    fn blank_image_yields_nothing() {
        let img = ImageBuffer::filled(32, 32, 3, 1.0).unwrap();
        assert!(blob_detect(&img, &BlobDetectorParams::default()).is_empty());
        let fixed = BlobDetectorParams { threshold_mode: ThresholdMode::Fixed(128), ..Default::default() };
        assert!(blob_detect(&img, &fixed).is_empty());
    }

    #[test]
    fn one_square_gives_tight_box() {
        let img = canvas(100, 80, &[(20, 15, 30, 30)]);
        let p = BlobDetectorParams { min_area_px: 50, cluster_area_px: 2000, ..Default::default() };
        let d = blob_detect(&img, &p);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].bbox, BoundingBox::new(20., 15., 50., 45.).unwrap());
        assert_eq!(d[0].label, Some(CellClass::SingleCancerCell));
        assert!((d[0].score - 900.0 / 4000.0).abs() < 1e-12);
    }

    #[test]
    fn two_squares_and_size_labels() {
        let img = canvas(120, 60, &[(5, 5, 8, 8), (60, 10, 40, 30)]);
        let p = BlobDetectorParams { min_area_px: 20, cluster_area_px: 300, ..Default::default() };
        let d = blob_detect(&img, &p);
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].bbox, BoundingBox::new(5., 5., 13., 13.).unwrap());
        assert_eq!(d[0].label, Some(CellClass::SingleCancerCell));
        assert_eq!(d[1].bbox, BoundingBox::new(60., 10., 100., 40.).unwrap());
        assert_eq!(d[1].label, Some(CellClass::CancerCluster));
        assert_eq!(d[1].score, 1.0);
    }

    #[test]
    fn small_specks_are_dropped() {
        let img = canvas(40, 40, &[(2, 2, 2, 2), (10, 10, 10, 10)]);
        let p = BlobDetectorParams { min_area_px: 5, cluster_area_px: 500, ..Default::default() };
        assert_eq!(blob_detect(&img, &p).len(), 1);
    }

    #[test]
    fn light_on_dark_polarity() {
        let img = ImageBuffer::from_fn(20, 20, 1, |x, y, _| if (5..9).contains(&x) && (5..9).contains(&y) { 0.9 } else { 0.05 }).unwrap();
        let p = BlobDetectorParams { polarity: Polarity::LightOnDark, min_area_px: 4, ..Default::default() };
        let d = blob_detect(&img, &p);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].bbox, BoundingBox::new(5., 5., 9., 9.).unwrap());
    }

    #[test]
    fn params_validation() {
        let bad = BlobDetectorParams { min_area_px: 300, cluster_area_px: 300, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(BlobDetectorParams::default().validate().is_ok());
    }
}
