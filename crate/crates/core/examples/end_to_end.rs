//! Full run on a synthetic dataset: import, augment, split, detect, evaluate, report.
//!
//! Pass a directory to keep the artifacts; otherwise a temp dir is used.

use celldet::config::RunConfig;
use celldet::pipeline::Pipeline;
use celldet::synthetic::{generate, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let root = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| tmp.path().to_path_buf());

    let data = root.join("data");
    generate(&SyntheticSpec::default())?.write_to(&data)?;
    let cfg = RunConfig { dataset_dir: data, out_dir: root.join("out"), seed: 7, ..Default::default() };
    println!("config hash {}", cfg.hash());

    let p = Pipeline::new(cfg)?;
    let imported = p.import()?;
    println!("imported {} images, {} objects", imported.images, imported.objects);
    for (j, n) in p.augment()?.written {
        println!("fold {j}: {n} derived images");
    }
    for s in p.split()? {
        println!("split {}: {}/{}", s.fold, s.training.len(), s.validation.len());
    }
    p.detect()?;
    p.evaluate()?;
    print!("{}", p.report()?.to_text());
    println!("artifacts in {}", p.layout().root.display());
    Ok(())
}
