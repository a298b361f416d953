//! Versioned JSON manifest: images, annotations, fold ids and augmentation
//! provenance in one document.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::FormatError;
use crate::augment::{derived_image_id, AugmentationVariant};
use crate::crossval::FoldAssignment;
use crate::model::Dataset;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    /// Hash of the run configuration that produced this manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub dataset: Dataset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<FoldAssignment>,
    #[serde(default)]
    pub variants: Vec<AugmentationVariant>,
}

impl Manifest {
    pub fn new(dataset: Dataset, folds: Option<FoldAssignment>, variants: Vec<AugmentationVariant>) -> Self {
        Self {
            format_version: MANIFEST_FORMAT_VERSION,
            config_hash: None,
            dataset,
            folds,
            variants,
        }
    }

    pub fn with_config_hash(mut self, hash: impl Into<String>) -> Self {
        self.config_hash = Some(hash.into());
        self
    }

    /// Every fold entry and variant must point at an image of the dataset,
    /// and every image must sit in exactly one fold.
    pub fn validate(&self) -> Result<(), FormatError> {
        if self.format_version != MANIFEST_FORMAT_VERSION {
            return Err(FormatError::Manifest(format!(
                "unsupported format_version {} (expected {MANIFEST_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let ids = self.dataset.image_ids();
        if let Some(f) = &self.folds {
            if let Some(id) = f.assignment.keys().find(|k| !ids.contains(k.as_str())) {
                return Err(FormatError::Manifest(format!("fold entry for unknown image {id:?}")));
            }
            if let Some(id) = ids.iter().find(|id| !f.assignment.contains_key(**id)) {
                return Err(FormatError::Manifest(format!("image {id:?} has no fold")));
            }
            if let Some((id, k)) = f.assignment.iter().find(|(_, &k)| k < 1 || k > f.n) {
                return Err(FormatError::Manifest(format!("image {id:?} in fold {k} outside 1..={}", f.n)));
            }
        }
        let mut derived = BTreeSet::new();
        for v in &self.variants {
            if !ids.contains(v.source_image_id.as_str()) {
                return Err(FormatError::Manifest(format!(
                    "variant {:?} derives from unknown image {:?}",
                    v.derived_image_id, v.source_image_id
                )));
            }
            if v.derived_image_id != derived_image_id(&v.source_image_id, v.d4, v.params.gamma) {
                return Err(FormatError::Manifest(format!(
                    "variant id {:?} does not match its provenance",
                    v.derived_image_id
                )));
            }
            if !derived.insert(v.derived_image_id.as_str()) {
                return Err(FormatError::Manifest(format!("variant {:?} listed twice", v.derived_image_id)));
            }
        }
        Ok(())
    }
}

/// Pretty JSON with a trailing newline. Field order is fixed by the struct
/// and maps are sorted, so equal manifests serialize to equal bytes.
pub fn write_manifest(m: &Manifest) -> Result<String, FormatError> {
    m.validate()?;
    let mut s = serde_json::to_string_pretty(m)?;
    s.push('\n');
    Ok(s)
}

pub fn read_manifest(text: &str) -> Result<Manifest, FormatError> {
    let m: Manifest = serde_json::from_str(text)?;
    m.validate()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{D4Element, Gamma, PowerLawParams, Schedule};
    use crate::crossval::partition;
    use crate::model::{Annotation, BoundingBox, CellClass, ImageRecord};

    fn dataset(n: usize) -> Dataset {
        let images: Vec<_> = (0..n).map(|i| ImageRecord::new(format!("m{i:02}.png"), 16, 16)).collect();
        let anns = images
            .iter()
            .map(|r| Annotation::new(r.image_id.clone(), BoundingBox::new(1.5, 2., 9., 12.25).unwrap(), CellClass::SingleMscCell))
            .collect();
        Dataset::new(images, anns).unwrap()
    }

    #[test]
    fn roundtrip_with_folds_and_variants() {
        let d = dataset(60);
        let f = partition(&d, 5, 3).unwrap();
        let variants = Schedule::default().variants_of("m00");
        let m = Manifest::new(d, Some(f), variants).with_config_hash("abc");
        let text = write_manifest(&m).unwrap();
        let back = read_manifest(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(write_manifest(&back).unwrap(), text);
        assert_eq!(back.variants.len(), 40);
        let folds = back.folds.unwrap();
        assert_eq!(folds.assignment.len(), 60);
        assert!(folds.assignment.values().all(|k| (1..=5).contains(k)));
    }

    #[test]
    fn dangling_references_are_rejected() {
        let d = dataset(4);
        let mut f = partition(&d, 2, 0).unwrap();
        f.assignment.insert("ghost".into(), 1);
        assert!(write_manifest(&Manifest::new(d.clone(), Some(f), vec![])).is_err());

        let mut f = partition(&d, 2, 0).unwrap();
        f.assignment.remove("m00");
        assert!(write_manifest(&Manifest::new(d.clone(), Some(f), vec![])).is_err());

        let v = AugmentationVariant::new("ghost", D4Element::Identity, PowerLawParams::unit(Gamma::ONE));
        assert!(write_manifest(&Manifest::new(d.clone(), None, vec![v])).is_err());

        let mut v = AugmentationVariant::new("m01", D4Element::Rot90, PowerLawParams::unit(Gamma::ONE));
        v.derived_image_id = "m01__rot180__g1x1".into();
        assert!(write_manifest(&Manifest::new(d, None, vec![v])).is_err());
    }

    #[test]
    fn version_is_checked() {
        let text = write_manifest(&Manifest::new(dataset(1), None, vec![])).unwrap();
        assert!(text.starts_with("{\n  \"format_version\": 1,"));
        let bumped = text.replacen("\"format_version\": 1", "\"format_version\": 2", 1);
        assert!(matches!(read_manifest(&bumped), Err(FormatError::Manifest(_))));
    }
}
