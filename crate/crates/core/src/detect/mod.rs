//! Detector seam and the two built-in detectors: a classical threshold/blob
//! baseline and a ground-truth perturbation oracle used to validate the
//! evaluation harness.

mod blob;
mod components;
mod otsu;
mod perturb;

pub use blob::{blob_detect, BlobDetectorParams, Polarity, ThresholdMode};
pub use components::{connected_components, BinaryMask, Component};
pub use otsu::{histogram, otsu_threshold};
pub use perturb::{perturb_detect, PerturbationParams};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{clip_to_image, ScoredBox};
use crate::model::Annotation;
use crate::raster::ImageBuffer;

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("invalid detector parameters: {0}")]
    Params(String),
}

/// Everything a detector may look at for one image.
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    pub image_id: &'a str,
    pub image: &'a ImageBuffer,
    /// Only the perturbation oracle reads this.
    pub ground_truth: &'a [Annotation],
}

/// Contract: boxes lie inside the image, scores in `[0, 1]`, labels set, and
/// the output is a pure function of the frame and the detector parameters.
pub trait Detector: Send + Sync {
    fn name(&self) -> &'static str;
    fn detect(&self, frame: &Frame<'_>) -> Vec<ScoredBox>;
}

pub struct BlobDetector {
    pub params: BlobDetectorParams,
}

impl Detector for BlobDetector {
    fn name(&self) -> &'static str {
        "blob"
    }

    fn detect(&self, frame: &Frame<'_>) -> Vec<ScoredBox> {
        blob_detect(frame.image, &self.params)
    }
}

pub struct PerturbationDetector {
    pub params: PerturbationParams,
}

impl Detector for PerturbationDetector {
    fn name(&self) -> &'static str {
        "perturb"
    }

    /// Each image gets its own stream, keyed by the base seed and image id.
    fn detect(&self, frame: &Frame<'_>) -> Vec<ScoredBox> {
        let params = PerturbationParams {
            seed: image_seed(self.params.seed, frame.image_id),
            ..self.params
        };
        perturb_detect(
            frame.ground_truth,
            frame.image.width(),
            frame.image.height(),
            &params,
        )
    }
}

fn image_seed(seed: u64, image_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(image_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
}

/// Serializable detector choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DetectorSpec {
    Blob(BlobDetectorParams),
    Perturb(PerturbationParams),
}

impl Default for DetectorSpec {
    fn default() -> Self {
        DetectorSpec::Blob(BlobDetectorParams::default())
    }
}

impl DetectorSpec {
    pub fn build(&self) -> Result<Box<dyn Detector>, DetectError> {
        Ok(match self {
            DetectorSpec::Blob(p) => {
                p.validate()?;
                Box::new(BlobDetector { params: *p })
            }
            DetectorSpec::Perturb(p) => {
                p.validate()?;
                Box::new(PerturbationDetector { params: *p })
            }
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DetectorSpec::Blob(_) => "blob",
            DetectorSpec::Perturb(_) => "perturb",
        }
    }
}

/// Checks detector output against the interface contract; returns the first
/// violation.
pub fn check_conformance(dets: &[ScoredBox], width: u32, height: u32) -> Result<(), String> {
    for (i, d) in dets.iter().enumerate() {
        if clip_to_image(&d.bbox, width, height) != Some(d.bbox) {
            return Err(format!("detection {i} box {} leaves the {width}x{height} image", d.bbox));
        }
        if !(0.0..=1.0).contains(&d.score) {
            return Err(format!("detection {i} score {} outside [0, 1]", d.score));
        }
        if d.label.is_none() {
            return Err(format!("detection {i} has no class label"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundingBox, CellClass};

    #[test]
    fn spec_serde_is_tagged() {
        let s = DetectorSpec::Perturb(PerturbationParams::identity(4));
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.starts_with(r#"{"kind":"perturb""#));
        assert_eq!(serde_json::from_str::<DetectorSpec>(&json).unwrap(), s);
        let blob = serde_json::to_value(DetectorSpec::default()).unwrap();
        assert_eq!(blob["threshold_mode"]["mode"], "otsu");
    }

    #[test]
    fn per_image_streams_differ() {
        let gt: Vec<Annotation> = (0..20)
            .map(|i| Annotation::new("a", BoundingBox::new(i as f64, 0., i as f64 + 5., 5.).unwrap(), CellClass::Artifact))
            .collect();
        let img = ImageBuffer::filled(40, 10, 1, 0.5).unwrap();
        let det = PerturbationDetector {
            params: PerturbationParams { jitter_px: 2.0, ..PerturbationParams::identity(1) },
        };
        let a = det.detect(&Frame { image_id: "a", image: &img, ground_truth: &gt });
        let b = det.detect(&Frame { image_id: "b", image: &img, ground_truth: &gt });
        assert_ne!(a, b);
        assert_eq!(a, det.detect(&Frame { image_id: "a", image: &img, ground_truth: &gt }));
        check_conformance(&a, 40, 10).unwrap();
    }

    #[test]
    fn conformance_flags_violations() {
        let b = BoundingBox::new(0., 0., 50., 5.).unwrap();
        assert!(check_conformance(&[ScoredBox::new(b, 0.5, Some(CellClass::Artifact))], 40, 10).is_err());
        let inside = BoundingBox::new(0., 0., 5., 5.).unwrap();
        assert!(check_conformance(&[ScoredBox::new(inside, 0.5, None)], 40, 10).is_err());
    }

    #[test]
    fn invalid_specs_do_not_build() {
        let s = DetectorSpec::Blob(BlobDetectorParams { min_area_px: 0, ..Default::default() });
        assert!(s.build().is_err());
    }
}
