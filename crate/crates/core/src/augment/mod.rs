//! Offline dataset expansion: every source image is materialized under each
//! (D4 element, gamma) pair of the schedule, with its boxes carried along.

mod d4;
mod intensity;

pub use self::d4::{apply_d4_box, apply_d4_image, D4Element};
pub use intensity::{
    power_law, power_law_clamped, to_grayscale, Gamma, PowerLawParams, LUMA_WEIGHTS,
};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Annotation, Dataset, ImageRecord, ModelError};
use crate::raster::ImageBuffer;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("invalid gamma {0:?}: expected a positive fraction such as 3/4")]
    Gamma(String),
    #[error("power-law scale c must be positive and finite, got {0}")]
    Scale(f64),
    #[error("power law with c = {c} maps intensity 1 outside [0, 1]; enable clamping or use c <= 1")]
    RangeViolation { c: f64 },
    #[error("augmentation schedule is empty")]
    EmptySchedule,
    #[error("augmentation schedule repeats {0}")]
    DuplicateSchedule(String),
    #[error("cannot expand an empty fold")]
    EmptyFold,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Spatial × intensity product applied to every source image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    pub d4: Vec<D4Element>,
    pub c: f64,
    pub gammas: Vec<Gamma>,
}

impl Default for Schedule {
    /// All eight symmetries and the five default exponents with `c = 1`: ×40.
    fn default() -> Self {
        Self {
            d4: D4Element::ALL.to_vec(),
            c: 1.0,
            gammas: Gamma::default_schedule(),
        }
    }
}

impl Schedule {
    pub fn identity() -> Self {
        Self {
            d4: vec![D4Element::Identity],
            c: 1.0,
            gammas: vec![Gamma::ONE],
        }
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        if self.d4.is_empty() || self.gammas.is_empty() {
            return Err(AugmentError::EmptySchedule);
        }
        PowerLawParams::new(self.c, Gamma::ONE)?;
        let mut seen = BTreeSet::new();
        if let Some(g) = self.d4.iter().find(|g| !seen.insert(g.index())) {
            return Err(AugmentError::DuplicateSchedule(g.to_string()));
        }
        let mut seen = BTreeSet::new();
        if let Some(g) = self.gammas.iter().find(|g| !seen.insert((g.num(), g.den()))) {
            return Err(AugmentError::DuplicateSchedule(format!("gamma {g}")));
        }
        Ok(())
    }

    pub fn multiplier(&self) -> usize {
        self.d4.len() * self.gammas.len()
    }

    /// Variants in materialization order: D4 index ascending, then gamma in
    /// schedule order.
    pub fn variants_of(&self, source_image_id: &str) -> Vec<AugmentationVariant> {
        let mut d4 = self.d4.clone();
        d4.sort();
        d4.into_iter()
            .flat_map(|g| {
                self.gammas.iter().map(move |&gamma| {
                    AugmentationVariant::new(source_image_id, g, PowerLawParams { c: self.c, gamma })
                })
            })
            .collect()
    }
}

/// Provenance of one derived image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationVariant {
    pub source_image_id: String,
    pub d4: D4Element,
    pub params: PowerLawParams,
    pub derived_image_id: String,
}

impl AugmentationVariant {
    pub fn new(source_image_id: &str, d4: D4Element, params: PowerLawParams) -> Self {
        Self {
            source_image_id: source_image_id.to_string(),
            d4,
            params,
            derived_image_id: derived_image_id(source_image_id, d4, params.gamma),
        }
    }
}

/// `<source_id>__<d4name>__g<num>x<den>`
pub fn derived_image_id(source_image_id: &str, d4: D4Element, gamma: Gamma) -> String {
    format!("{source_image_id}__{}__{}", d4.name(), gamma.tag())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedImage {
    pub variant: AugmentationVariant,
    pub record: ImageRecord,
    pub annotations: Vec<Annotation>,
}

/// A fold after expansion, sorted by (source id, D4 index, gamma position).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AugmentedFold {
    pub images: Vec<AugmentedImage>,
}

impl AugmentedFold {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn source_ids(&self) -> BTreeSet<&str> {
        self.images
            .iter()
            .map(|i| i.variant.source_image_id.as_str())
            .collect()
    }

    pub fn derived_ids(&self) -> BTreeSet<&str> {
        self.images.iter().map(|i| i.record.image_id.as_str()).collect()
    }

    pub fn variants(&self) -> impl Iterator<Item = &AugmentationVariant> {
        self.images.iter().map(|i| &i.variant)
    }

    pub fn object_count(&self) -> usize {
        self.images.iter().map(|i| i.annotations.len()).sum()
    }

    /// The derived images as a plain dataset.
    pub fn to_dataset(&self) -> Result<Dataset, ModelError> {
        Dataset::new(
            self.images.iter().map(|i| i.record.clone()).collect(),
            self.images
                .iter()
                .flat_map(|i| i.annotations.iter().cloned())
                .collect(),
        )
    }

    pub fn concat<'a>(folds: impl IntoIterator<Item = &'a AugmentedFold>) -> AugmentedFold {
        let mut images: Vec<AugmentedImage> = folds
            .into_iter()
            .flat_map(|f| f.images.iter().cloned())
            .collect();
        images.sort_by(|a, b| a.record.image_id.cmp(&b.record.image_id));
        AugmentedFold { images }
    }
}

/// Expands every image of `fold` under every variant of `schedule`.
///
/// Only records and boxes are produced here; pixels are rendered per variant
/// with [`render_variant`].
pub fn expand(fold: &Dataset, schedule: &Schedule) -> Result<AugmentedFold, AugmentError> {
    schedule.validate()?;
    if fold.images().is_empty() {
        return Err(AugmentError::EmptyFold);
    }
    let mut images = Vec::with_capacity(fold.images().len() * schedule.multiplier());
    for src in fold.images() {
        let anns: Vec<&Annotation> = fold.annotations_for(&src.image_id).collect();
        for variant in schedule.variants_of(&src.image_id) {
            let (w, h) = variant.d4.output_size(src.width, src.height);
            let record = ImageRecord {
                image_id: variant.derived_image_id.clone(),
                file_path: format!("{}.png", variant.derived_image_id),
                width: w,
                height: h,
                colorspace: src.colorspace,
            };
            let mut annotations: Vec<Annotation> = anns
                .iter()
                .map(|a| Annotation {
                    image_id: variant.derived_image_id.clone(),
                    bbox: apply_d4_box(&a.bbox, variant.d4, src.width, src.height),
                    label: a.label,
                })
                .collect();
            annotations.sort_by(crate::model::annotation_order);
            images.push(AugmentedImage {
                variant,
                record,
                annotations,
            });
        }
    }
    Ok(AugmentedFold { images })
}

/// Pixels of one derived image. Spatial and intensity maps commute, so the
/// order of application does not affect the result.
pub fn render_variant(
    source: &ImageBuffer,
    variant: &AugmentationVariant,
) -> Result<ImageBuffer, AugmentError> {
    let moved = apply_d4_image(source, variant.d4);
    power_law(&moved, variant.params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundingBox, CellClass};

    fn fold(n: usize) -> Dataset {
        let images: Vec<ImageRecord> = (0..n)
            .map(|i| ImageRecord::new(format!("img{i:02}.png"), 64, 48))
            .collect();
        let anns = images
            .iter()
            .enumerate()
            .flat_map(|(i, r)| {
                (0..=(i % 3)).map(move |k| {
                    let x = 4.0 + 12.0 * k as f64;
                    Annotation::new(
                        r.image_id.clone(),
                        BoundingBox::new(x, 5.0, x + 9.0, 20.0).unwrap(),
                        CellClass::from_index(k).unwrap(),
                    )
                })
            })
            .collect();
        Dataset::new(images, anns).unwrap()
    }

    #[test]
    fn twelve_images_expand_to_480() {
        let f = fold(12);
        let out = expand(&f, &Schedule::default()).unwrap();
        assert_eq!(out.len(), 480);
        assert_eq!(out.derived_ids().len(), 480);
        assert_eq!(out.object_count(), f.object_count() * 40);
    }

    #[test]
    fn sixty_images_expand_to_2400() {
        assert_eq!(expand(&fold(60), &Schedule::default()).unwrap().len(), 2400);
    }

    #[test]
    fn identity_schedule_only_renames() {
        let f = fold(3);
        let out = expand(&f, &Schedule::identity()).unwrap();
        assert_eq!(out.len(), 3);
        for (img, src) in out.images.iter().zip(f.images()) {
            assert_eq!(img.record.image_id, format!("{}__id__g1x1", src.image_id));
            let boxes: Vec<_> = img.annotations.iter().map(|a| (a.bbox, a.label)).collect();
            let orig: Vec<_> = f.annotations_for(&src.image_id).map(|a| (a.bbox, a.label)).collect();
            assert_eq!(boxes, orig);
        }
    }

    #[test]
    fn listing_order_is_source_then_d4_then_gamma() {
        let sched = Schedule {
            d4: vec![D4Element::FlipV, D4Element::Identity],
            c: 1.0,
            gammas: vec![Gamma::new(4, 3).unwrap(), Gamma::new(3, 4).unwrap()],
        };
        let out = expand(&fold(2), &sched).unwrap();
        let ids: Vec<&str> = out.images.iter().map(|i| i.record.image_id.as_str()).collect();
        assert_eq!(
            ids,
            [
                "img00__id__g4x3",
                "img00__id__g3x4",
                "img00__flipv__g4x3",
                "img00__flipv__g3x4",
                "img01__id__g4x3",
                "img01__id__g3x4",
                "img01__flipv__g4x3",
                "img01__flipv__g3x4",
            ]
        );
    }

    #[test]
    fn schedule_validation() {
        let mut s = Schedule::default();
        s.gammas.clear();
        assert!(matches!(expand(&fold(1), &s), Err(AugmentError::EmptySchedule)));
        let mut s = Schedule::default();
        s.d4.push(D4Element::Rot90);
        assert!(matches!(s.validate(), Err(AugmentError::DuplicateSchedule(_))));
        assert!(matches!(
            expand(&Dataset::default(), &Schedule::default()),
            Err(AugmentError::EmptyFold)
        ));
    }

    #[test]
    fn swapped_frames_keep_boxes_in_bounds() {
        let out = expand(&fold(4), &Schedule::default()).unwrap();
        let ds = out.to_dataset().unwrap();
        assert_eq!(ds.images().len(), 160);
        let rot = ds.image("img00__rot90__g1x1").unwrap();
        assert_eq!((rot.width, rot.height), (48, 64));
    }

    #[test]
    fn render_matches_manual_composition() {
        let src = ImageBuffer::from_fn(5, 3, 3, |x, y, c| f64::from(x + 2 * y + u32::from(c)) / 20.0).unwrap();
        let v = AugmentationVariant::new("s", D4Element::Rot270, PowerLawParams::unit(Gamma::new(5, 4).unwrap()));
        let a = render_variant(&src, &v).unwrap();
        let b = apply_d4_image(&power_law(&src, v.params).unwrap(), v.d4);
        assert_eq!(a, b);
    }
}
