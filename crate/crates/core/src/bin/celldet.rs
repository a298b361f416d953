use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use celldet::augment::{D4Element, Gamma};
use celldet::config::RunConfig;
use celldet::detect::{BlobDetectorParams, DetectorSpec, PerturbationParams};
use celldet::pipeline::Pipeline;
use celldet::serve::{start, ServeState};

#[derive(Parser)]
#[command(name = "celldet", version, about = "Cell-detection data pipeline")]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags override the config file.
#[derive(Args)]
struct Flags {
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    dataset_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    folds: Option<u32>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated exponents, e.g. 3/4,1,4/3
    #[arg(long, global = true, value_delimiter = ',')]
    gammas: Option<Vec<Gamma>>,
    /// Comma-separated symmetries: id, rot90, rot180, rot270, fliph, flipv,
    /// transpose, antitranspose
    #[arg(long, global = true, value_delimiter = ',')]
    d4: Option<Vec<D4Element>>,
    /// blob or perturb; parameters come from the config file
    #[arg(long, global = true)]
    detector: Option<String>,
    #[arg(long, global = true)]
    iou_threshold: Option<f64>,
    #[arg(long, global = true)]
    fold_index: Option<u32>,
    #[arg(long, global = true)]
    grayscale: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Read annotations.csv or *.xml and write the manifest
    Import,
    /// Partition into folds and render the derived images
    Augment,
    /// Write the training/validation listings
    Split,
    /// Run the detector over the validation images
    Detect,
    /// Score detections against ground truth
    Evaluate,
    /// Aggregate the per-fold reports
    Report,
    /// All stages in order
    Run,
    /// Serve the dataset directory to the review UI
    Serve {
        #[arg(long, default_value = "127.0.0.1:8765")]
        addr: String,
    },
}

fn resolve(f: &Flags) -> Result<RunConfig> {
    let mut cfg = match &f.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &f.dataset_dir {
        cfg.dataset_dir = v.clone();
    }
    if let Some(v) = &f.out_dir {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = f.folds {
        cfg.folds = v;
    }
    if let Some(v) = f.seed {
        cfg.seed = v;
    }
    if let Some(v) = &f.gammas {
        cfg.schedule.gammas = v.clone();
    }
    if let Some(v) = &f.d4 {
        cfg.schedule.d4 = v.clone();
    }
    if let Some(kind) = &f.detector {
        if kind != cfg.detector.kind() {
            cfg.detector = match kind.as_str() {
                "blob" => DetectorSpec::Blob(BlobDetectorParams::default()),
                "perturb" => DetectorSpec::Perturb(PerturbationParams::default()),
                other => bail!("unknown detector {other:?}; expected blob or perturb"),
            };
        }
    }
    if let Some(v) = f.iou_threshold {
        cfg.iou_threshold = v;
    }
    if f.fold_index.is_some() {
        cfg.fold_index = f.fold_index;
    }
    if f.grayscale {
        cfg.grayscale = true;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli.flags)?;

    if let Cmd::Serve { addr } = &cli.cmd {
        let out = cfg.out_dir.is_dir().then_some(cfg.out_dir.as_path());
        let state = ServeState::open(&cfg.dataset_dir, out)
            .with_context(|| format!("cannot serve {}", cfg.dataset_dir.display()))?;
        let server = start(Arc::new(state), addr)?;
        println!("serving {} on http://{}/api", cfg.dataset_dir.display(), server.addr());
        server.join();
        return Ok(());
    }

    let p = Pipeline::new(cfg)?;
    match cli.cmd {
        Cmd::Import => {
            let s = p.import()?;
            println!("imported {} images, {} objects", s.images, s.objects);
        }
        Cmd::Augment => {
            let s = p.augment()?;
            for (j, n) in &s.written {
                println!("fold {j}: {n} derived images");
            }
        }
        Cmd::Split => {
            for s in p.split()? {
                println!("split {}: {} training, {} validation", s.fold, s.training.len(), s.validation.len());
            }
        }
        Cmd::Detect => {
            for d in p.detect()? {
                let n: usize = d.images.iter().map(|i| i.detections.len()).sum();
                println!("fold {}: {n} detections on {} images", d.fold, d.images.len());
            }
        }
        Cmd::Evaluate => {
            for r in p.evaluate()? {
                println!("fold {}: accuracy {:.3}", r.fold, r.report.accuracy);
            }
        }
        Cmd::Report => print!("{}", p.report()?.to_text()),
        Cmd::Run => print!("{}", p.run_all()?.to_text()),
        Cmd::Serve { .. } => unreachable!("handled above"),
    }
    Ok(())
}
