//! Local JSON-over-HTTP data API for the annotation review UI.
//!
//! Every request is a `POST /api` whose body is one JSON message tagged by
//! `op`:
//!
//! | op                | fields                          | reply                                   |
//! |-------------------|---------------------------------|-----------------------------------------|
//! | `list-images`     |                                 | `images: [{image_id, file_name, ...}]`  |
//! | `get-image`       | `image_id`                      | `mime`, base64 `data`                   |
//! | `get-annotations` | `image_id`                      | `version`, `rows`                       |
//! | `put-annotations` | `image_id`, `version`, `rows`   | new `version`, or 409 `conflict`        |
//! | `get-detections`  | `image_id`                      | `detections`, `fold`, `match` summary   |
//!
//! Replies carry `"ok": true|false`; failures add `error` (a short code) and
//! `message`. The dataset directory's `annotations.csv` is the only store: a
//! successful put rewrites it in canonical form, so saving unchanged rows
//! leaves the file byte-identical. Versions start at 0 per image and advance
//! on each successful put; a put quoting an older version is rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::annotation_io::{dataset_from_voc, parse_csv, write_csv, CsvRow, FormatError};
use crate::model::{Annotation, BoundingBox, CellClass, Dataset, ImageRecord};
use crate::pipeline::{read_detections, read_fold_report};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "tif", "tiff"];
const WORKERS: usize = 4;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("dataset directory {0} not found")]
    NoDataset(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
    #[error("cannot bind {addr}: {message}")]
    Bind { addr: String, message: String },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// One annotation as exchanged with the UI: integer pixel corners, max
/// exclusive, exactly as in the CSV listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRow {
    pub class: CellClass,
    pub xmin: i64,
    pub ymin: i64,
    pub xmax: i64,
    pub ymax: i64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ApiRequest {
    ListImages,
    GetImage { image_id: String },
    GetAnnotations { image_id: String },
    PutAnnotations { image_id: String, version: u64, rows: Vec<AnnotationRow> },
    GetDetections { image_id: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub status: u16,
    pub body: Value,
}

impl Reply {
    fn ok(mut body: Value) -> Self {
        body["ok"] = json!(true);
        Self { status: 200, body }
    }

    fn err(status: u16, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "ok": false, "error": code, "message": message.into() }),
        }
    }
}

struct Store {
    dataset: Dataset,
    versions: BTreeMap<String, u64>,
}

/// Shared server state; the handler methods are usable without a socket.
pub struct ServeState {
    dataset_dir: PathBuf,
    out_dir: Option<PathBuf>,
    store: Mutex<Store>,
}

impl ServeState {
    /// Loads `annotations.csv` (or `*.xml` when there is no CSV) and adds
    /// every image file in the directory that has no annotations yet.
    pub fn open(dataset_dir: &Path, out_dir: Option<&Path>) -> Result<Self, ServeError> {
        if !dataset_dir.is_dir() {
            return Err(ServeError::NoDataset(dataset_dir.to_path_buf()));
        }
        let csv = dataset_dir.join("annotations.csv");
        let mut dataset = if csv.is_file() {
            let text = read(&csv)?;
            parse_csv(&text).map_err(|source| ServeError::Format { path: csv.clone(), source })?
        } else {
            let mut docs = Vec::new();
            for p in files_with(dataset_dir, &["xml"])? {
                docs.push(read(&p)?);
            }
            dataset_from_voc(docs.iter().map(String::as_str))
                .map_err(|source| ServeError::Format { path: dataset_dir.to_path_buf(), source })?
        };
        let known: BTreeSet<String> = dataset.images().iter().map(|i| i.file_path.clone()).collect();
        let mut images = dataset.images().to_vec();
        for sub in [None, Some("images")] {
            let dir = sub.map_or(dataset_dir.to_path_buf(), |s| dataset_dir.join(s));
            if !dir.is_dir() {
                continue;
            }
            for p in files_with(&dir, &IMAGE_EXTENSIONS)? {
                let rel = p.strip_prefix(dataset_dir).expect("listed under the dataset dir");
                let rel = rel.to_string_lossy().replace('\\', "/");
                if known.contains(&rel) {
                    continue;
                }
                let (w, h) = image::image_dimensions(&p).map_err(|source| ServeError::Image { path: p.clone(), source })?;
                let rec = ImageRecord::new(rel, w, h);
                if !images.iter().any(|i| i.image_id == rec.image_id) {
                    images.push(rec);
                }
            }
        }
        dataset = dataset.with_images(images)?;
        let versions = dataset.images().iter().map(|i| (i.image_id.clone(), 0)).collect();
        Ok(Self {
            dataset_dir: dataset_dir.to_path_buf(),
            out_dir: out_dir.map(Path::to_path_buf),
            store: Mutex::new(Store { dataset, versions }),
        })
    }

    pub fn dataset(&self) -> Dataset {
        self.lock().dataset.clone()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Store> {
        // a panic while holding the lock leaves the store consistent: every
        // mutation swaps in a fully built dataset
        self.store.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Parses and dispatches one message body.
    pub fn handle_message(&self, body: &str) -> Reply {
        match serde_json::from_str::<ApiRequest>(body) {
            Ok(req) => self.handle(req),
            Err(e) => Reply::err(400, "bad_request", e.to_string()),
        }
    }

    pub fn handle(&self, req: ApiRequest) -> Reply {
        match req {
            ApiRequest::ListImages => self.list_images(),
            ApiRequest::GetImage { image_id } => self.get_image(&image_id),
            ApiRequest::GetAnnotations { image_id } => self.get_annotations(&image_id),
            ApiRequest::PutAnnotations { image_id, version, rows } => self.put_annotations(&image_id, version, &rows),
            ApiRequest::GetDetections { image_id } => self.get_detections(&image_id),
        }
    }

    fn list_images(&self) -> Reply {
        let store = self.lock();
        let images: Vec<Value> = store
            .dataset
            .images()
            .iter()
            .map(|i| {
                json!({
                    "image_id": i.image_id,
                    "file_name": i.file_path,
                    "width": i.width,
                    "height": i.height,
                    "annotations": store.dataset.annotations_for(&i.image_id).count(),
                    "version": store.versions[&i.image_id],
                })
            })
            .collect();
        Reply::ok(json!({ "images": images }))
    }

    fn get_image(&self, image_id: &str) -> Reply {
        let rec = match self.lock().dataset.image(image_id) {
            Some(r) => r.clone(),
            None => return not_found(image_id),
        };
        let path = self.dataset_dir.join(&rec.file_path);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) => return Reply::err(404, "not_found", format!("{}: {e}", path.display())),
        };
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let mime = if ext == "png" { "image/png" } else { "image/tiff" };
        Reply::ok(json!({
            "image_id": rec.image_id,
            "mime": mime,
            "width": rec.width,
            "height": rec.height,
            "data": base64::engine::general_purpose::STANDARD.encode(bytes),
        }))
    }

    fn get_annotations(&self, image_id: &str) -> Reply {
        let store = self.lock();
        let Some(rec) = store.dataset.image(image_id) else {
            return not_found(image_id);
        };
        let rows: Vec<AnnotationRow> = store
            .dataset
            .annotations_for(image_id)
            .map(|a| {
                let r = CsvRow::from_annotation(rec, a);
                AnnotationRow { class: r.class, xmin: r.xmin, ymin: r.ymin, xmax: r.xmax, ymax: r.ymax }
            })
            .collect();
        Reply::ok(json!({ "image_id": image_id, "version": store.versions[image_id], "rows": rows }))
    }

    fn put_annotations(&self, image_id: &str, version: u64, rows: &[AnnotationRow]) -> Reply {
        let mut store = self.lock();
        let Some(rec) = store.dataset.image(image_id).cloned() else {
            return not_found(image_id);
        };
        let current = store.versions[image_id];
        if version != current {
            let mut r = Reply::err(
                409,
                "conflict",
                format!("annotations of {image_id:?} changed since version {version}; reload (now at version {current})"),
            );
            r.body["current_version"] = json!(current);
            return r;
        }
        // the same checks the CSV parser applies, reported by row position
        let mut anns = Vec::with_capacity(rows.len());
        let mut seen = BTreeSet::new();
        for (k, row) in rows.iter().enumerate() {
            let line = format!(
                "{},{},{},{},{},{},{},{}",
                rec.file_path, rec.width, rec.height, row.class, row.xmin, row.ymin, row.xmax, row.ymax
            );
            let parsed = match CsvRow::parse(&line, k + 1) {
                Ok(p) => p,
                Err(e) => return Reply::err(422, "invalid_rows", format!("row {}: {e}", k + 1)),
            };
            if !seen.insert(parsed.clone()) {
                return Reply::err(422, "invalid_rows", format!("row {} duplicates an earlier row", k + 1));
            }
            let bbox = BoundingBox::new(parsed.xmin as f64, parsed.ymin as f64, parsed.xmax as f64, parsed.ymax as f64)
                .expect("parser rejects degenerate boxes");
            anns.push(Annotation::new(image_id, bbox, parsed.class));
        }
        let updated = match store.dataset.with_image_annotations(image_id, anns) {
            Ok(d) => d,
            Err(e) => return Reply::err(422, "invalid_rows", e.to_string()),
        };
        if let Err(e) = self.persist(&updated) {
            return Reply::err(500, "io", e.to_string());
        }
        store.dataset = updated;
        let next = current + 1;
        store.versions.insert(image_id.to_string(), next);
        Reply::ok(json!({ "image_id": image_id, "version": next }))
    }

    /// Writes the canonical listing via a temporary file and a rename.
    fn persist(&self, d: &Dataset) -> std::io::Result<()> {
        let path = self.dataset_dir.join("annotations.csv");
        let tmp = self.dataset_dir.join(".annotations.csv.tmp");
        std::fs::write(&tmp, write_csv(d))?;
        std::fs::rename(&tmp, &path)
    }

    fn get_detections(&self, image_id: &str) -> Reply {
        if self.lock().dataset.image(image_id).is_none() {
            return not_found(image_id);
        }
        let Some(out) = &self.out_dir else {
            return Reply::ok(json!({ "image_id": image_id, "found": false, "detections": [] }));
        };
        let docs = files_with(&out.join("detections"), &["json"]).unwrap_or_default();
        for path in docs {
            let Ok(doc) = read_detections(&path) else { continue };
            let Some(im) = doc.images.iter().find(|i| i.image_id == image_id) else { continue };
            let summary = read_fold_report(&out.join("reports").join(format!("fold_{}.json", doc.fold)))
                .ok()
                .and_then(|r| r.images.into_iter().find(|s| s.image_id == image_id));
            return Reply::ok(json!({
                "image_id": image_id,
                "found": true,
                "fold": doc.fold,
                "detector": doc.detector,
                "detections": im.detections,
                "match": summary,
            }));
        }
        Reply::ok(json!({ "image_id": image_id, "found": false, "detections": [] }))
    }
}

fn not_found(image_id: &str) -> Reply {
    Reply::err(404, "not_found", format!("no image {image_id:?} in the dataset"))
}

fn read(path: &Path) -> Result<String, ServeError> {
    std::fs::read_to_string(path).map_err(|source| ServeError::Io { path: path.to_path_buf(), source })
}

/// Files directly in `dir` with one of the extensions, sorted.
fn files_with(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>, ServeError> {
    let io = |source| ServeError::Io { path: dir.to_path_buf(), source };
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let p = entry.map_err(io)?.path();
        let ext = p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if p.is_file() && ext.is_some_and(|e| exts.contains(&e.as_str())) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn header(name: &str, value: &str) -> tiny_http::Header {
    tiny_http::Header::from_bytes(name.as_bytes(), value.as_bytes()).expect("static header is valid")
}

fn respond(state: &ServeState, mut req: tiny_http::Request) {
    let cors = [
        header("Access-Control-Allow-Origin", "*"),
        header("Access-Control-Allow-Methods", "POST, GET, OPTIONS"),
        header("Access-Control-Allow-Headers", "Content-Type"),
    ];
    let reply = match (req.method(), req.url()) {
        (tiny_http::Method::Options, _) => {
            let mut r = tiny_http::Response::empty(204);
            for h in cors {
                r.add_header(h);
            }
            let _ = req.respond(r);
            return;
        }
        (tiny_http::Method::Post, "/api") => {
            let mut body = String::new();
            match req.as_reader().read_to_string(&mut body) {
                Ok(_) => state.handle_message(&body),
                Err(e) => Reply::err(400, "bad_request", e.to_string()),
            }
        }
        (tiny_http::Method::Get, "/") => Reply::ok(json!({ "service": "celldet", "api": "POST /api" })),
        _ => Reply::err(404, "not_found", "POST JSON messages to /api"),
    };
    let mut r = tiny_http::Response::from_string(reply.body.to_string()).with_status_code(reply.status);
    r.add_header(header("Content-Type", "application/json"));
    for h in cors {
        r.add_header(h);
    }
    let _ = req.respond(r);
}

/// A running server; requests are handled on a small worker pool.
pub struct RunningServer {
    server: Arc<tiny_http::Server>,
    stop: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
    addr: SocketAddr,
}

impl RunningServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the workers exit.
    pub fn join(self) {
        for w in self.workers {
            let _ = w.join();
        }
    }

    pub fn shutdown(self) {
        self.stop.store(true, Ordering::SeqCst);
        for _ in &self.workers {
            self.server.unblock();
        }
        self.join();
    }
}

/// Binds `addr` (use port 0 for an ephemeral port) and starts serving.
pub fn start(state: Arc<ServeState>, addr: &str) -> Result<RunningServer, ServeError> {
    let server = tiny_http::Server::http(addr).map_err(|e| ServeError::Bind {
        addr: addr.to_string(),
        message: e.to_string(),
    })?;
    let bound = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| ServeError::Bind { addr: addr.to_string(), message: "not an IP socket".into() })?;
    let server = Arc::new(server);
    let stop = Arc::new(AtomicBool::new(false));
    let workers = (0..WORKERS)
        .map(|_| {
            let (server, stop, state) = (server.clone(), stop.clone(), state.clone());
            std::thread::spawn(move || loop {
                match server.recv() {
                    Ok(req) => respond(&state, req),
                    Err(_) if stop.load(Ordering::SeqCst) => break,
                    Err(_) => continue,
                }
            })
        })
        .collect();
    Ok(RunningServer { server, stop, workers, addr: bound })
}
