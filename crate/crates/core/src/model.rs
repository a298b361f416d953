//! Domain types shared across the pipeline: boxes, classes, image records and
//! the annotated dataset.
//!
//! Coordinates are continuous pixels with the origin at the top-left corner,
//! x growing rightward and y downward. The max corner is exclusive, so a box
//! covering a full `W x H` image is `(0, 0, W, H)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("degenerate box ({xmin}, {ymin}, {xmax}, {ymax}): min corner must be strictly less than max corner")]
    DegenerateBox {
        xmin: f64,
        ymin: f64,
        xmax: f64,
        ymax: f64,
    },
    #[error("box coordinates must be finite")]
    NonFiniteBox,
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("unknown colorspace {0:?}")]
    UnknownColorspace(String),
    #[error("image {image_id:?} has zero size {width}x{height}")]
    EmptyImage {
        image_id: String,
        width: u32,
        height: u32,
    },
    #[error("duplicate image id {0:?}")]
    DuplicateImage(String),
    #[error("annotation references unknown image {0:?}")]
    DanglingAnnotation(String),
    #[error("box {bbox} lies outside image {image_id:?} ({width}x{height})")]
    OutOfBounds {
        image_id: String,
        bbox: BoundingBox,
        width: u32,
        height: u32,
    },
}

/// Axis-aligned rectangle with strictly positive area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    xmin: f64,
    ymin: f64,
    xmax: f64,
    ymax: f64,
}

impl BoundingBox {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self, ModelError> {
        if !(xmin.is_finite() && ymin.is_finite() && xmax.is_finite() && ymax.is_finite()) {
            return Err(ModelError::NonFiniteBox);
        }
        if xmin >= xmax || ymin >= ymax {
            return Err(ModelError::DegenerateBox {
                xmin,
                ymin,
                xmax,
                ymax,
            });
        }
        Ok(Self {
            xmin,
            ymin,
            xmax,
            ymax,
        })
    }

    /// The box covering a whole `width x height` image.
    pub fn full(width: u32, height: u32) -> Result<Self, ModelError> {
        Self::new(0.0, 0.0, f64::from(width), f64::from(height))
    }

    /// Box from center and size, as used by the box regressor.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, ModelError> {
        Self::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    pub fn xmin(&self) -> f64 {
        self.xmin
    }
    pub fn ymin(&self) -> f64 {
        self.ymin
    }
    pub fn xmax(&self) -> f64 {
        self.xmax
    }
    pub fn ymax(&self) -> f64 {
        self.ymax
    }
    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }
    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }
    pub fn center(&self) -> (f64, f64) {
        ((self.xmin + self.xmax) / 2.0, (self.ymin + self.ymax) / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Overlap rectangle, or `None` when the boxes only touch or are disjoint.
    pub fn intersect(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let xmin = self.xmin.max(other.xmin);
        let ymin = self.ymin.max(other.ymin);
        let xmax = self.xmax.min(other.xmax);
        let ymax = self.ymax.min(other.ymax);
        if xmin >= xmax || ymin >= ymax {
            return None;
        }
        Some(BoundingBox {
            xmin,
            ymin,
            xmax,
            ymax,
        })
    }

    pub fn within(&self, width: u32, height: u32) -> bool {
        self.xmin >= 0.0
            && self.ymin >= 0.0
            && self.xmax <= f64::from(width)
            && self.ymax <= f64::from(height)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.xmin, self.ymin, self.xmax, self.ymax]
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = ModelError;

    fn try_from(c: [f64; 4]) -> Result<Self, Self::Error> {
        Self::new(c[0], c[1], c[2], c[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.as_array()
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.xmin, self.ymin, self.xmax, self.ymax
        )
    }
}

/// Area of a box; free-function form of [`BoundingBox::area`].
pub fn box_area(b: &BoundingBox) -> f64 {
    b.area()
}

/// Free-function form of [`BoundingBox::intersect`].
pub fn intersect(a: &BoundingBox, b: &BoundingBox) -> Option<BoundingBox> {
    a.intersect(b)
}

/// The five annotation categories, in labeling order (a) through (e).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CellClass {
    SingleCancerCell,
    CancerCluster,
    SingleMscCell,
    MscCluster,
    Artifact,
}

impl CellClass {
    pub const ALL: [CellClass; 5] = [
        CellClass::SingleCancerCell,
        CellClass::CancerCluster,
        CellClass::SingleMscCell,
        CellClass::MscCluster,
        CellClass::Artifact,
    ];

    /// Serialized token used in CSV listings, XML and manifests.
    pub fn as_str(self) -> &'static str {
        match self {
            CellClass::SingleCancerCell => "Single_cancer_cell",
            CellClass::CancerCluster => "Cancer_cluster",
            CellClass::SingleMscCell => "Single_MSC_cell",
            CellClass::MscCluster => "MSC_cluster",
            CellClass::Artifact => "Artifact",
        }
    }

    /// Zero-based position in [`CellClass::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<CellClass> {
        Self::ALL.get(i).copied()
    }
}

impl FromStr for CellClass {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| ModelError::UnknownClass(s.to_string()))
    }
}

impl TryFrom<String> for CellClass {
    type Error = ModelError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<CellClass> for String {
    fn from(c: CellClass) -> Self {
        c.as_str().to_string()
    }
}

impl fmt::Display for CellClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Class → integer id mapping for model export. Ids run 1..=5; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    order: Vec<CellClass>,
}

impl Default for LabelMap {
    fn default() -> Self {
        Self {
            order: CellClass::ALL.to_vec(),
        }
    }
}

impl LabelMap {
    pub fn id(&self, class: CellClass) -> u8 {
        // the map always holds all five classes
        self.order.iter().position(|&c| c == class).unwrap() as u8 + 1
    }

    pub fn class(&self, id: u8) -> Option<CellClass> {
        match id {
            0 => None,
            _ => self.order.get(usize::from(id) - 1).copied(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellClass, u8)> + '_ {
        self.order
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i as u8 + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Colorspace {
    Rgb,
    Mono,
    Gray,
}

impl Colorspace {
    pub fn as_str(self) -> &'static str {
        match self {
            Colorspace::Rgb => "rgb",
            Colorspace::Mono => "mono",
            Colorspace::Gray => "gray",
        }
    }
}

impl FromStr for Colorspace {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rgb" => Ok(Colorspace::Rgb),
            "mono" => Ok(Colorspace::Mono),
            "gray" => Ok(Colorspace::Gray),
            _ => Err(ModelError::UnknownColorspace(s.to_string())),
        }
    }
}

/// One source or derived image. `colorspace` is `None` until pixel data has
/// been inspected; the annotation formats do not carry it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub file_path: String,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colorspace: Option<Colorspace>,
}

impl ImageRecord {
    pub fn new(file_path: impl Into<String>, width: u32, height: u32) -> Self {
        let file_path = file_path.into();
        Self {
            image_id: image_id_for_path(&file_path),
            file_path,
            width,
            height,
            colorspace: None,
        }
    }

    pub fn with_colorspace(mut self, colorspace: Colorspace) -> Self {
        self.colorspace = Some(colorspace);
        self
    }
}

/// Image ids are the file name without directories or extension.
pub fn image_id_for_path(path: &str) -> String {
    let name = path.rsplit(['/', '\\']).next().unwrap_or(path);
    match name.rfind('.') {
        Some(dot) if dot > 0 => name[..dot].to_string(),
        _ => name.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub image_id: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub label: CellClass,
}

impl Annotation {
    pub fn new(image_id: impl Into<String>, bbox: BoundingBox, label: CellClass) -> Self {
        Self {
            image_id: image_id.into(),
            bbox,
            label,
        }
    }
}

/// Canonical ordering of annotations within a dataset.
pub(crate) fn annotation_order(a: &Annotation, b: &Annotation) -> std::cmp::Ordering {
    a.image_id
        .cmp(&b.image_id)
        .then(a.bbox.ymin.total_cmp(&b.bbox.ymin))
        .then(a.bbox.xmin.total_cmp(&b.bbox.xmin))
        .then(a.label.cmp(&b.label))
        .then(a.bbox.ymax.total_cmp(&b.bbox.ymax))
        .then(a.bbox.xmax.total_cmp(&b.bbox.xmax))
}

/// A validated set of images and the labeled regions inside them.
///
/// Images are kept sorted by id and annotations in canonical order, so two
/// datasets with the same content compare equal regardless of how they were
/// assembled.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawDataset", into = "RawDataset")]
pub struct Dataset {
    images: Vec<ImageRecord>,
    annotations: Vec<Annotation>,
}

#[derive(Serialize, Deserialize)]
struct RawDataset {
    images: Vec<ImageRecord>,
    annotations: Vec<Annotation>,
}

impl TryFrom<RawDataset> for Dataset {
    type Error = ModelError;
    fn try_from(r: RawDataset) -> Result<Self, Self::Error> {
        Dataset::new(r.images, r.annotations)
    }
}

impl From<Dataset> for RawDataset {
    fn from(d: Dataset) -> Self {
        RawDataset {
            images: d.images,
            annotations: d.annotations,
        }
    }
}

impl Dataset {
    pub fn new(
        mut images: Vec<ImageRecord>,
        mut annotations: Vec<Annotation>,
    ) -> Result<Self, ModelError> {
        images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        for pair in images.windows(2) {
            if pair[0].image_id == pair[1].image_id {
                return Err(ModelError::DuplicateImage(pair[0].image_id.clone()));
            }
        }
        for img in &images {
            if img.width == 0 || img.height == 0 {
                return Err(ModelError::EmptyImage {
                    image_id: img.image_id.clone(),
                    width: img.width,
                    height: img.height,
                });
            }
        }
        let by_id: BTreeMap<&str, &ImageRecord> =
            images.iter().map(|i| (i.image_id.as_str(), i)).collect();
        for a in &annotations {
            let img = by_id
                .get(a.image_id.as_str())
                .ok_or_else(|| ModelError::DanglingAnnotation(a.image_id.clone()))?;
            if !a.bbox.within(img.width, img.height) {
                return Err(ModelError::OutOfBounds {
                    image_id: a.image_id.clone(),
                    bbox: a.bbox,
                    width: img.width,
                    height: img.height,
                });
            }
        }
        annotations.sort_by(annotation_order);
        Ok(Self {
            images,
            annotations,
        })
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn image(&self, image_id: &str) -> Option<&ImageRecord> {
        self.images
            .binary_search_by(|i| i.image_id.as_str().cmp(image_id))
            .ok()
            .map(|k| &self.images[k])
    }

    /// Annotations of one image, in canonical order.
    pub fn annotations_for<'a>(&'a self, image_id: &'a str) -> impl Iterator<Item = &'a Annotation> {
        self.annotations
            .iter()
            .filter(move |a| a.image_id == image_id)
    }

    pub fn image_ids(&self) -> BTreeSet<&str> {
        self.images.iter().map(|i| i.image_id.as_str()).collect()
    }

    pub fn object_count(&self) -> usize {
        self.annotations.len()
    }

    /// Sub-dataset restricted to the given image ids.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Dataset {
        let keep: BTreeSet<&str> = ids.into_iter().collect();
        Dataset {
            images: self
                .images
                .iter()
                .filter(|i| keep.contains(i.image_id.as_str()))
                .cloned()
                .collect(),
            annotations: self
                .annotations
                .iter()
                .filter(|a| keep.contains(a.image_id.as_str()))
                .cloned()
                .collect(),
        }
    }

    /// Replace the annotations of one image, keeping everything else.
    pub fn with_image_annotations(
        &self,
        image_id: &str,
        annotations: Vec<Annotation>,
    ) -> Result<Dataset, ModelError> {
        let mut all: Vec<Annotation> = self
            .annotations
            .iter()
            .filter(|a| a.image_id != image_id)
            .cloned()
            .collect();
        all.extend(annotations);
        Dataset::new(self.images.clone(), all)
    }

    /// Same annotations over a new list of image records, e.g. with
    /// colorspaces filled in after probing the files.
    pub fn with_images(&self, images: Vec<ImageRecord>) -> Result<Dataset, ModelError> {
        Dataset::new(images, self.annotations.clone())
    }
}
