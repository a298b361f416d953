//! Cell-detection data pipeline for microscopy images: annotation formats,
//! offline D4 × power-law augmentation, leak-free cross-validation splits,
//! region-proposal geometry, baseline detectors and an evaluation harness.
//!
//! The runnable programs under `examples/` walk through each capability.

pub mod annotation_io;
pub mod augment;
pub mod config;
pub mod crossval;
pub mod detect;
pub mod eval;
pub mod geometry;
pub mod model;
pub mod pipeline;
pub mod raster;
pub mod serve;
pub mod synthetic;

pub use model::{Annotation, BoundingBox, CellClass, Dataset, ImageRecord};
