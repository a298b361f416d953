//! Annotation formats: the canonical CSV listing, LabelImg / Pascal-VOC XML
//! import, and the versioned JSON dataset manifest.

mod csv;
mod manifest;
mod voc;

pub use self::csv::{parse_csv, write_csv, CsvRow, CSV_HEADER};
pub use manifest::{read_manifest, write_manifest, Manifest, MANIFEST_FORMAT_VERSION};
pub use voc::{dataset_from_voc, import_voc_xml};

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("unknown class {name:?} at line {line}")]
    UnknownClass { line: usize, name: String },
    #[error("zero-area box at line {line}")]
    DegenerateBox { line: usize },
    #[error("box ({xmin}, {ymin}, {xmax}, {ymax}) outside {width}x{height} image at line {line}")]
    OutOfBounds {
        line: usize,
        xmin: i64,
        ymin: i64,
        xmax: i64,
        ymax: i64,
        width: u32,
        height: u32,
    },
    #[error("inconsistent size for {filename:?} at line {line}: {width}x{height}, earlier rows say {prev_width}x{prev_height}")]
    InconsistentSize {
        line: usize,
        filename: String,
        width: u32,
        height: u32,
        prev_width: u32,
        prev_height: u32,
    },
    #[error("duplicate row at line {line} (same as line {first})")]
    DuplicateRow { line: usize, first: usize },
    #[error("{filename:?} at line {line} maps to image id {image_id:?}, already used by {other:?}")]
    ImageIdCollision {
        line: usize,
        filename: String,
        image_id: String,
        other: String,
    },
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("missing XML element <{0}>")]
    MissingElement(String),
    #[error("invalid value {value:?} in <{element}>")]
    BadValue { element: String, value: String },
    #[error("unknown class {0:?} in XML object")]
    UnknownXmlClass(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("manifest JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}
