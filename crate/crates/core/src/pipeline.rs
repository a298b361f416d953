//! The staged run: import → augment → split → detect → evaluate → report.
//!
//! Each stage reads the previous stage's artifacts from the output directory
//! and refuses to continue if they were produced under a different config
//! hash. Layout under `out_dir`:
//!
//! ```text
//! config.toml                 resolved configuration
//! manifest.json               dataset, folds, augmentation provenance
//! annotations.csv             canonical source listing
//! augmented/annotations.csv   derived listing (all folds)
//! augmented/images/*.png      derived pixels (selected folds)
//! splits/split_<j>.json       training / validation id lists
//! detections/fold_<j>.json    detector output on the validation images
//! reports/fold_<j>.{json,txt} per-fold evaluation
//! report.{json,txt}           cross-fold summary
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::ImageDecoder;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation_io::{dataset_from_voc, parse_csv, read_manifest, write_csv, write_manifest, FormatError, Manifest};
use crate::augment::{expand, render_variant, to_grayscale, AugmentError, AugmentedFold};
use crate::config::{ConfigError, RunConfig};
use crate::crossval::{build_split, partition_with, FoldAssignment, SplitError};
use crate::detect::{check_conformance, DetectError, DetectorSpec, Frame};
use crate::eval::{aggregate, evaluate_image, match_with, AggregateError, EvaluationReport, FoldAggregate};
use crate::geometry::ScoredBox;
use crate::model::{Annotation, Colorspace, Dataset, ImageRecord, ModelError};
use crate::raster::{ImageBuffer, RasterError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Raster { path: PathBuf, source: RasterError },
    #[error("missing {path}: {hint}")]
    Missing { path: PathBuf, hint: String },
    #[error("{path} was produced with config hash {found}, but the current config hashes to {expected}; re-run `{stage}` with the current config")]
    Stale {
        path: PathBuf,
        found: String,
        expected: String,
        stage: &'static str,
    },
    #[error("{0}")]
    Mismatch(String),
    #[error("detector output violates its contract on {image_id}: {message}")]
    Contract { image_id: String, message: String },
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
}

type Result<T> = std::result::Result<T, PipelineError>;

/// Paths of every artifact under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
    pub fn source_csv(&self) -> PathBuf {
        self.root.join("annotations.csv")
    }
    pub fn augmented_csv(&self) -> PathBuf {
        self.root.join("augmented").join("annotations.csv")
    }
    pub fn augmented_images(&self) -> PathBuf {
        self.root.join("augmented").join("images")
    }
    pub fn split(&self, j: u32) -> PathBuf {
        self.root.join("splits").join(format!("split_{j}.json"))
    }
    pub fn detections(&self, j: u32) -> PathBuf {
        self.root.join("detections").join(format!("fold_{j}.json"))
    }
    pub fn fold_report(&self, j: u32) -> PathBuf {
        self.root.join("reports").join(format!("fold_{j}.json"))
    }
    pub fn fold_table(&self, j: u32) -> PathBuf {
        self.root.join("reports").join(format!("fold_{j}.txt"))
    }
    pub fn summary_json(&self) -> PathBuf {
        self.root.join("report.json")
    }
    pub fn summary_txt(&self) -> PathBuf {
        self.root.join("report.txt")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitListing {
    pub config_hash: String,
    pub fold: u32,
    pub folds: u32,
    pub training: Vec<String>,
    pub validation: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageDetections {
    pub image_id: String,
    pub detections: Vec<ScoredBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionsDoc {
    pub config_hash: String,
    pub fold: u32,
    pub detector: DetectorSpec,
    pub grayscale: bool,
    pub images: Vec<ImageDetections>,
}

/// Match outcome of one image, for overlays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMatchSummary {
    pub image_id: String,
    pub matched: usize,
    pub correct: usize,
    pub unmatched_gt: usize,
    pub unmatched_det: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub config_hash: String,
    pub fold: u32,
    pub report: EvaluationReport,
    pub images: Vec<ImageMatchSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldLine {
    pub fold: u32,
    pub accuracy: f64,
    pub correct: u64,
    pub gt_total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub iou_threshold: f64,
    pub folds: Vec<FoldLine>,
    pub aggregate: FoldAggregate,
    /// Sum of the per-fold confusion matrices.
    pub pooled: EvaluationReport,
}

impl RunReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for f in &self.folds {
            s.push_str(&format!(
                "fold {}: accuracy {:.3} ({}/{})\n",
                f.fold, f.accuracy, f.correct, f.gt_total
            ));
        }
        s.push_str(&format!(
            "accuracy over {} folds: {}\n",
            self.folds.len(),
            self.aggregate.summary()
        ));
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportSummary {
    pub images: usize,
    pub objects: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentSummary {
    /// Fold index → number of derived images written.
    pub written: BTreeMap<u32, usize>,
    pub variants: usize,
}

pub struct Pipeline {
    cfg: RunConfig,
    hash: String,
    layout: Layout,
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let hash = cfg.hash();
        let layout = Layout::new(&cfg.out_dir);
        Ok(Self { cfg, hash, layout })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Reads `annotations.csv`, or every `*.xml` when there is no CSV, checks
    /// each referenced image on disk and writes the manifest.
    pub fn import(&self) -> Result<ImportSummary> {
        let dir = &self.cfg.dataset_dir;
        if !dir.is_dir() {
            return Err(PipelineError::Missing {
                path: dir.clone(),
                hint: "dataset directory not found; pass --dataset-dir".into(),
            });
        }
        let csv_path = dir.join("annotations.csv");
        let dataset = if csv_path.is_file() {
            let text = read_text(&csv_path, "")?;
            parse_csv(&text).map_err(|source| PipelineError::Format { path: csv_path.clone(), source })?
        } else {
            let mut xml: Vec<PathBuf> = list_dir(dir)?
                .into_iter()
                .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml")))
                .collect();
            xml.sort();
            if xml.is_empty() {
                return Err(PipelineError::Missing {
                    path: csv_path,
                    hint: "the dataset directory has neither annotations.csv nor *.xml files".into(),
                });
            }
            let docs = xml.iter().map(|p| read_text(p, "")).collect::<Result<Vec<_>>>()?;
            dataset_from_voc(docs.iter().map(String::as_str))
                .map_err(|source| PipelineError::Format { path: dir.clone(), source })?
        };
        let images = dataset
            .images()
            .iter()
            .map(|rec| probe_image(dir, rec))
            .collect::<Result<Vec<_>>>()?;
        let dataset = dataset.with_images(images)?;

        write_text(&self.layout.config(), &self.cfg.to_toml_string())?;
        write_text(&self.layout.source_csv(), &write_csv(&dataset))?;
        self.write_manifest(&Manifest::new(dataset.clone(), None, Vec::new()).with_config_hash(&self.hash))?;
        Ok(ImportSummary {
            images: dataset.images().len(),
            objects: dataset.object_count(),
        })
    }

    /// Partitions the sources, then expands and renders each selected fold.
    /// The manifest and derived listing always cover every fold.
    pub fn augment(&self) -> Result<AugmentSummary> {
        let manifest = self.load_manifest("import")?;
        let d = &manifest.dataset;
        let folds = partition_with(d, self.cfg.folds, self.cfg.seed, self.cfg.stratify)?;
        let augmented = self.expand_folds(d, &folds)?;

        let img_dir = self.layout.augmented_images();
        create_dir(&img_dir)?;
        let mut written = BTreeMap::new();
        for j in self.cfg.fold_range() {
            let fold = &augmented[&j];
            let sources: Vec<&ImageRecord> = folds
                .members(j)
                .into_iter()
                .map(|id| d.image(id).expect("fold members come from the dataset"))
                .collect();
            sources.par_iter().try_for_each(|src| -> Result<()> {
                let path = self.cfg.dataset_dir.join(&src.file_path);
                let pixels = load_image(&path)?;
                for img in fold.images.iter().filter(|i| i.variant.source_image_id == src.image_id) {
                    let out = render_variant(&pixels, &img.variant)?;
                    let dest = img_dir.join(&img.record.file_path);
                    out.save(&dest).map_err(|source| PipelineError::Raster { path: dest, source })?;
                }
                Ok(())
            })?;
            written.insert(j, fold.len());
        }

        let variants: Vec<_> = augmented.values().flat_map(|f| f.variants().cloned()).collect();
        let n_variants = variants.len();
        let all = AugmentedFold::concat(augmented.values());
        // listed relative to augmented/, so that directory is itself a dataset
        let derived = all.to_dataset()?;
        let listed = derived.with_images(
            derived
                .images()
                .iter()
                .map(|r| ImageRecord { file_path: format!("images/{}", r.file_path), ..r.clone() })
                .collect(),
        )?;
        write_text(&self.layout.augmented_csv(), &write_csv(&listed))?;
        write_text(&self.layout.config(), &self.cfg.to_toml_string())?;
        self.write_manifest(
            &Manifest::new(manifest.dataset, Some(folds), variants).with_config_hash(&self.hash),
        )?;
        Ok(AugmentSummary {
            written,
            variants: n_variants,
        })
    }

    /// Writes the training/validation listing of each selected split and
    /// checks that no source image appears on both sides.
    pub fn split(&self) -> Result<Vec<SplitListing>> {
        let (manifest, folds) = self.load_partitioned()?;
        let augmented = self.expand_folds(&manifest.dataset, &folds)?;
        let mut out = Vec::new();
        for j in self.cfg.fold_range() {
            let s = build_split(&folds, &augmented, j)?;
            let shared = s.shared_sources();
            if !shared.is_empty() {
                return Err(PipelineError::Mismatch(format!(
                    "split {j} leaks source images {shared:?} into both sides"
                )));
            }
            let listing = SplitListing {
                config_hash: self.hash.clone(),
                fold: j,
                folds: folds.n,
                training: s.training.derived_ids().into_iter().map(str::to_string).collect(),
                validation: s.validation.derived_ids().into_iter().map(str::to_string).collect(),
            };
            write_json(&self.layout.split(j), &listing)?;
            out.push(listing);
        }
        Ok(out)
    }

    /// Runs the configured detector over the validation images of each
    /// selected split.
    pub fn detect(&self) -> Result<Vec<DetectionsDoc>> {
        let (manifest, folds) = self.load_partitioned()?;
        let detector = self.cfg.detector.build()?;
        let img_dir = self.layout.augmented_images();
        let mut out = Vec::new();
        for j in self.cfg.fold_range() {
            let listing: SplitListing =
                self.load_artifact(&self.layout.split(j), &format!("no split listing for fold {j}; run `split` first"), "split")?;
            let fold = expand(&folds.fold_dataset(&manifest.dataset, j), &self.cfg.schedule)?;
            let gt = ground_truth(&fold);
            let images = listing
                .validation
                .par_iter()
                .map(|id| -> Result<ImageDetections> {
                    let path = img_dir.join(format!("{id}.png"));
                    if !path.is_file() {
                        return Err(PipelineError::Missing {
                            path,
                            hint: format!("derived image not rendered; run `augment` for fold {j}"),
                        });
                    }
                    let mut pixels = load_image(&path)?;
                    if self.cfg.grayscale {
                        pixels = to_grayscale(&pixels);
                    }
                    let truth = gt.get(id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
                    let frame = Frame { image_id: id.as_str(), image: &pixels, ground_truth: truth };
                    let detections = detector.detect(&frame);
                    check_conformance(&detections, pixels.width(), pixels.height()).map_err(|message| {
                        PipelineError::Contract { image_id: id.clone(), message }
                    })?;
                    Ok(ImageDetections { image_id: id.clone(), detections })
                })
                .collect::<Result<Vec<_>>>()?;
            let doc = DetectionsDoc {
                config_hash: self.hash.clone(),
                fold: j,
                detector: self.cfg.detector.clone(),
                grayscale: self.cfg.grayscale,
                images,
            };
            write_json(&self.layout.detections(j), &doc)?;
            out.push(doc);
        }
        Ok(out)
    }

    /// Scores each selected fold's detections against the derived ground
    /// truth.
    pub fn evaluate(&self) -> Result<Vec<FoldReport>> {
        let (manifest, folds) = self.load_partitioned()?;
        let thr = self.cfg.iou_threshold;
        let mut out = Vec::new();
        for j in self.cfg.fold_range() {
            let doc: DetectionsDoc = self.load_artifact(
                &self.layout.detections(j),
                &format!("no detections for fold {j}; run `detect` first"),
                "detect",
            )?;
            let fold = expand(&folds.fold_dataset(&manifest.dataset, j), &self.cfg.schedule)?;
            let gt = ground_truth(&fold);
            let mut reports = Vec::with_capacity(doc.images.len());
            let mut images = Vec::with_capacity(doc.images.len());
            for im in &doc.images {
                let truth = gt.get(im.image_id.as_str()).ok_or_else(|| {
                    PipelineError::Mismatch(format!(
                        "detections for fold {j} mention {:?}, which is not a validation image of that fold",
                        im.image_id
                    ))
                })?;
                let m = match_with(truth, &im.detections, thr, self.cfg.match_mode);
                let correct = m.pairs.iter().filter(|p| Some(truth[p.gt].label) == im.detections[p.det].label).count();
                images.push(ImageMatchSummary {
                    image_id: im.image_id.clone(),
                    matched: m.pairs.len(),
                    correct,
                    unmatched_gt: m.unmatched_gt.len(),
                    unmatched_det: m.unmatched_det.len(),
                });
                reports.push(evaluate_image(truth, &im.detections, thr, self.cfg.match_mode));
            }
            let report = FoldReport {
                config_hash: self.hash.clone(),
                fold: j,
                report: EvaluationReport::merge(thr, reports.iter()),
                images,
            };
            write_json(&self.layout.fold_report(j), &report)?;
            write_text(&self.layout.fold_table(j), &report.report.to_table())?;
            out.push(report);
        }
        Ok(out)
    }

    /// Aggregates all fold reports. Every fold must be present and produced
    /// under the current settings.
    pub fn report(&self) -> Result<RunReport> {
        let n = self.cfg.folds;
        let missing: Vec<u32> = (1..=n).filter(|&j| !self.layout.fold_report(j).is_file()).collect();
        if !missing.is_empty() {
            return Err(PipelineError::Missing {
                path: self.layout.root.join("reports"),
                hint: format!("no evaluation report for folds {missing:?}; run `evaluate` for every fold first"),
            });
        }
        let mut reports = Vec::new();
        for j in 1..=n {
            let path = self.layout.fold_report(j);
            let r: FoldReport = read_json(&path, "")?;
            if r.config_hash != self.hash {
                return Err(PipelineError::Mismatch(format!(
                    "{} was produced with config hash {}, but the current config hashes to {}; \
                     reports with different augmentation or threshold settings cannot be aggregated",
                    path.display(),
                    r.config_hash,
                    self.hash
                )));
            }
            if r.report.iou_threshold != self.cfg.iou_threshold {
                return Err(PipelineError::Mismatch(format!(
                    "{} used IoU threshold {}, expected {}",
                    path.display(),
                    r.report.iou_threshold,
                    self.cfg.iou_threshold
                )));
            }
            reports.push(r);
        }
        let evals: Vec<EvaluationReport> = reports.iter().map(|r| r.report.clone()).collect();
        let run = RunReport {
            config_hash: self.hash.clone(),
            iou_threshold: self.cfg.iou_threshold,
            folds: reports
                .iter()
                .map(|r| FoldLine {
                    fold: r.fold,
                    accuracy: r.report.accuracy,
                    correct: r.report.correct,
                    gt_total: r.report.gt_total,
                })
                .collect(),
            aggregate: aggregate(&evals)?,
            pooled: EvaluationReport::merge(self.cfg.iou_threshold, evals.iter()),
        };
        write_json(&self.layout.summary_json(), &run)?;
        write_text(&self.layout.summary_txt(), &run.to_text())?;
        Ok(run)
    }

    /// Every stage in order over all folds.
    pub fn run_all(&self) -> Result<RunReport> {
        if self.cfg.fold_index.is_some() {
            return Err(PipelineError::Mismatch(
                "a full run covers every fold; drop --fold-index".into(),
            ));
        }
        self.import()?;
        self.augment()?;
        self.split()?;
        self.detect()?;
        self.evaluate()?;
        self.report()
    }

    fn write_manifest(&self, m: &Manifest) -> Result<()> {
        let path = self.layout.manifest();
        let text = write_manifest(m).map_err(|source| PipelineError::Format { path: path.clone(), source })?;
        write_text(&path, &text)
    }

    fn load_manifest(&self, stage: &'static str) -> Result<Manifest> {
        let path = self.layout.manifest();
        let text = read_text(&path, &format!("run `{stage}` first"))?;
        let m = read_manifest(&text).map_err(|source| PipelineError::Format { path: path.clone(), source })?;
        if m.config_hash.as_deref() != Some(self.hash.as_str()) {
            return Err(PipelineError::Stale {
                path,
                found: m.config_hash.unwrap_or_else(|| "(none)".into()),
                expected: self.hash.clone(),
                stage,
            });
        }
        Ok(m)
    }

    fn load_partitioned(&self) -> Result<(Manifest, FoldAssignment)> {
        let mut m = self.load_manifest("augment")?;
        match m.folds.take() {
            Some(f) => Ok((m, f)),
            None => Err(PipelineError::Missing {
                path: self.layout.manifest(),
                hint: "the manifest has no fold assignment; run `augment` first".into(),
            }),
        }
    }

    fn load_artifact<T: DeserializeOwned + HasHash>(&self, path: &Path, hint: &str, stage: &'static str) -> Result<T> {
        let v: T = read_json(path, hint)?;
        if v.config_hash() != self.hash {
            return Err(PipelineError::Stale {
                path: path.to_path_buf(),
                found: v.config_hash().to_string(),
                expected: self.hash.clone(),
                stage,
            });
        }
        Ok(v)
    }

    fn expand_folds(&self, d: &Dataset, folds: &FoldAssignment) -> Result<BTreeMap<u32, AugmentedFold>> {
        (1..=folds.n)
            .map(|j| Ok((j, expand(&folds.fold_dataset(d, j), &self.cfg.schedule)?)))
            .collect()
    }
}

trait HasHash {
    fn config_hash(&self) -> &str;
}

impl HasHash for SplitListing {
    fn config_hash(&self) -> &str {
        &self.config_hash
    }
}

impl HasHash for DetectionsDoc {
    fn config_hash(&self) -> &str {
        &self.config_hash
    }
}

fn ground_truth(fold: &AugmentedFold) -> BTreeMap<&str, Vec<Annotation>> {
    fold.images
        .iter()
        .map(|i| (i.record.image_id.as_str(), i.annotations.clone()))
        .collect()
}

/// Confirms the file exists with the recorded size and reads its colorspace.
fn probe_image(dir: &Path, rec: &ImageRecord) -> Result<ImageRecord> {
    let path = dir.join(&rec.file_path);
    if !path.is_file() {
        return Err(PipelineError::Missing {
            path,
            hint: format!("image for {:?} listed in the annotations is not in the dataset directory", rec.image_id),
        });
    }
    let raster_err = |e: image::ImageError| PipelineError::Raster { path: path.clone(), source: e.into() };
    let decoder = image::ImageReader::open(&path)
        .map_err(|source| PipelineError::Io { path: path.clone(), source })?
        .with_guessed_format()
        .map_err(|source| PipelineError::Io { path: path.clone(), source })?
        .into_decoder()
        .map_err(raster_err)?;
    let (w, h) = decoder.dimensions();
    if (w, h) != (rec.width, rec.height) {
        return Err(PipelineError::Mismatch(format!(
            "{} is {w}x{h} but the annotations say {}x{}",
            path.display(),
            rec.width,
            rec.height
        )));
    }
    let colorspace = if decoder.color_type().has_color() { Colorspace::Rgb } else { Colorspace::Mono };
    Ok(rec.clone().with_colorspace(colorspace))
}

fn load_image(path: &Path) -> Result<ImageBuffer> {
    if !path.is_file() {
        return Err(PipelineError::Missing {
            path: path.to_path_buf(),
            hint: "image file not found".into(),
        });
    }
    ImageBuffer::load(path).map_err(|source| PipelineError::Raster { path: path.to_path_buf(), source })
}

fn list_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |source| PipelineError::Io { path: dir.to_path_buf(), source };
    std::fs::read_dir(dir)
        .map_err(io)?
        .map(|e| e.map(|e| e.path()).map_err(io))
        .collect()
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io { path: dir.to_path_buf(), source })
}

fn read_text(path: &Path, hint: &str) -> Result<String> {
    match std::fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(PipelineError::Missing {
            path: path.to_path_buf(),
            hint: if hint.is_empty() { "file not found".into() } else { hint.into() },
        }),
        Err(source) => Err(PipelineError::Io { path: path.to_path_buf(), source }),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    std::fs::write(path, text).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })
}

fn read_json<T: DeserializeOwned>(path: &Path, hint: &str) -> Result<T> {
    let text = read_text(path, hint)?;
    serde_json::from_str(&text).map_err(|source| PipelineError::Json { path: path.to_path_buf(), source })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifacts serialize");
    text.push('\n');
    write_text(path, &text)
}

/// Reads a detections document, for tools that only need to display it.
pub fn read_detections(path: &Path) -> Result<DetectionsDoc> {
    read_json(path, "no detections document")
}

/// Reads a per-fold evaluation report.
pub fn read_fold_report(path: &Path) -> Result<FoldReport> {
    read_json(path, "no evaluation report")
}
