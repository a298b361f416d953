//! Run configuration: one TOML file, overridable field by field.
//!
//! ```toml
//! dataset_dir = "data"
//! out_dir = "out"
//! folds = 5
//! seed = 42
//! iou_threshold = 0.5
//!
//! [schedule]
//! d4 = ["id", "rot90", "rot180", "rot270", "fliph", "flipv", "transpose", "antitranspose"]
//! gammas = ["3/4", "4/5", "1", "5/4", "4/3"]
//! c = 1.0
//!
//! [detector]
//! kind = "blob"
//! min_area_px = 12
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::augment::Schedule;
use crate::crossval::Stratify;
use crate::detect::DetectorSpec;
use crate::eval::{MatchMode, DEFAULT_IOU_THRESHOLD};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding the source images and `annotations.csv` or `*.xml`.
    pub dataset_dir: PathBuf,
    pub out_dir: PathBuf,
    pub folds: u32,
    pub seed: u64,
    pub stratify: Stratify,
    pub schedule: Schedule,
    pub detector: DetectorSpec,
    pub iou_threshold: f64,
    pub match_mode: MatchMode,
    /// Convert to a single luma channel before detection.
    pub grayscale: bool,
    /// Restrict augment, split, detect and evaluate to one fold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fold_index: Option<u32>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("out"),
            folds: 5,
            seed: 0,
            stratify: Stratify::None,
            schedule: Schedule::default(),
            detector: DetectorSpec::default(),
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            match_mode: MatchMode::ClassAgnostic,
            grayscale: false,
            fold_index: None,
        }
    }
}

/// The fields that change what gets computed. Paths and the fold filter are
/// left out so the same run can be moved or executed one fold at a time.
#[derive(Serialize)]
struct HashedFields<'a> {
    folds: u32,
    seed: u64,
    stratify: Stratify,
    schedule: &'a Schedule,
    detector: &'a DetectorSpec,
    iou_threshold: f64,
    match_mode: MatchMode,
    grayscale: bool,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.folds < 2 {
            return Err(ConfigError::Invalid(format!("folds must be at least 2, got {}", self.folds)));
        }
        if let Some(j) = self.fold_index {
            if j < 1 || j > self.folds {
                return Err(ConfigError::Invalid(format!(
                    "fold_index {j} outside 1..={}",
                    self.folds
                )));
            }
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "iou_threshold must be in (0, 1], got {}",
                self.iou_threshold
            )));
        }
        self.schedule
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.detector
            .build()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON of the semantic fields.
    pub fn hash(&self) -> String {
        let fields = HashedFields {
            folds: self.folds,
            seed: self.seed,
            stratify: self.stratify,
            schedule: &self.schedule,
            detector: &self.detector,
            iou_threshold: self.iou_threshold,
            match_mode: self.match_mode,
            grayscale: self.grayscale,
        };
        let json = serde_json::to_vec(&fields).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Folds a stage should process: the selected one, or all of them.
    pub fn fold_range(&self) -> Vec<u32> {
        match self.fold_index {
            Some(j) => vec![j],
            None => (1..=self.folds).collect(),
        }
    }
}
