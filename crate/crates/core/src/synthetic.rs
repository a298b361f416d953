//! Seeded blob fixtures: dark cells and cell clusters on a light, slightly
//! noisy background, with exact ground-truth boxes.
//!
//! Each image is cut into 32×32 slots and every object sits inside its own
//! slot with a 2 px margin, so objects never touch. Single cells are 5 to 10
//! px rectangles. A cluster is a chain of 2 to 4 overlapping cells of 7 to
//! 10 px, each offset 3 to 5 px from the previous one on both axes, so even
//! the smallest cluster covers 82 px. Against the default blob cut of 90 px,
//! the largest singles (9×10 and up) come out labeled as clusters.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::annotation_io::write_csv;
use crate::model::{Annotation, BoundingBox, CellClass, Colorspace, Dataset, ImageRecord};
use crate::raster::{ImageBuffer, RasterError};

const SLOT: u32 = 32;
const MARGIN: u32 = 2;

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("{objects} objects do not fit in {images} images of {slots} slots each")]
    TooManyObjects {
        objects: usize,
        images: usize,
        slots: usize,
    },
    #[error("image size must be at least {SLOT}x{SLOT}")]
    TooSmall,
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub images: usize,
    pub width: u32,
    pub height: u32,
    /// Total objects, spread as evenly as possible over the images.
    pub objects: usize,
    /// Probability that an object is a cluster rather than a single cell.
    pub cluster_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            images: 60,
            width: 128,
            height: 128,
            objects: 279,
            cluster_rate: 0.4,
            seed: 2019,
        }
    }
}

pub struct SyntheticDataset {
    pub dataset: Dataset,
    /// Pixels aligned with `dataset.images()`.
    pub pixels: Vec<ImageBuffer>,
}

impl SyntheticDataset {
    pub fn pixels_of(&self, image_id: &str) -> Option<&ImageBuffer> {
        let i = self.dataset.images().iter().position(|r| r.image_id == image_id)?;
        self.pixels.get(i)
    }

    /// Writes every image under its file name plus `annotations.csv`.
    pub fn write_to(&self, dir: &Path) -> Result<(), SyntheticError> {
        std::fs::create_dir_all(dir)?;
        for (rec, px) in self.dataset.images().iter().zip(&self.pixels) {
            px.save(&dir.join(&rec.file_path))?;
        }
        std::fs::write(dir.join("annotations.csv"), write_csv(&self.dataset))?;
        Ok(())
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticDataset, SyntheticError> {
    if spec.width < SLOT || spec.height < SLOT {
        return Err(SyntheticError::TooSmall);
    }
    let cols = spec.width / SLOT;
    let rows = spec.height / SLOT;
    let slots = (cols * rows) as usize;
    if spec.images == 0 || spec.objects > spec.images * slots {
        return Err(SyntheticError::TooManyObjects {
            objects: spec.objects,
            images: spec.images,
            slots,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut counts = vec![spec.objects / spec.images; spec.images];
    let mut extra: Vec<usize> = (0..spec.images).collect();
    extra.shuffle(&mut rng);
    for &i in &extra[..spec.objects % spec.images] {
        counts[i] += 1;
    }

    let mut records = Vec::with_capacity(spec.images);
    let mut annotations = Vec::new();
    let mut pixels = Vec::with_capacity(spec.images);
    for (i, &count) in counts.iter().enumerate() {
        let colorspace = if i % 3 == 2 { Colorspace::Mono } else { Colorspace::Rgb };
        let rec = ImageRecord::new(format!("syn_{i:03}.png"), spec.width, spec.height).with_colorspace(colorspace);
        let mut mask = vec![false; (spec.width * spec.height) as usize];
        let mut order: Vec<u32> = (0..slots as u32).collect();
        order.shuffle(&mut rng);
        for &slot in &order[..count] {
            let (sx, sy) = ((slot % cols) * SLOT, (slot / cols) * SLOT);
            let cluster = rng.random_bool(spec.cluster_rate);
            let cells = if cluster { rng.random_range(2..=4) } else { 1 };
            let bbox = draw_object(&mut rng, &mut mask, spec.width, sx, sy, cells);
            let label = if cluster { CellClass::CancerCluster } else { CellClass::SingleCancerCell };
            annotations.push(Annotation::new(rec.image_id.clone(), bbox, label));
        }
        pixels.push(render(&mut rng, &mask, spec.width, spec.height, colorspace));
        records.push(rec);
    }
    let dataset = Dataset::new(records, annotations).expect("generated references are consistent");
    Ok(SyntheticDataset { dataset, pixels })
}

/// Rasterizes a chain of overlapping rectangles into the slot at (sx, sy) and
/// returns the tight box of the painted pixels.
fn draw_object(rng: &mut ChaCha8Rng, mask: &mut [bool], width: u32, sx: u32, sy: u32, cells: u32) -> BoundingBox {
    let mut rects: Vec<(i32, i32, i32, i32)> = Vec::new();
    let (mut x, mut y) = (0i32, 0i32);
    for k in 0..cells {
        if k > 0 {
            // offsets below the minimum cell size keep consecutive cells overlapping
            let mut step = || rng.random_range(3..=5) * if rng.random_bool(0.5) { 1 } else { -1 };
            x += step();
            y += step();
        }
        let (w, h) = if cells == 1 {
            (rng.random_range(5..=10), rng.random_range(5..=10))
        } else {
            (rng.random_range(7..=10), rng.random_range(7..=10))
        };
        rects.push((x, y, x + w, y + h));
    }
    let x0 = rects.iter().map(|r| r.0).min().unwrap();
    let y0 = rects.iter().map(|r| r.1).min().unwrap();
    let x1 = rects.iter().map(|r| r.2).max().unwrap();
    let y1 = rects.iter().map(|r| r.3).max().unwrap();
    let room = (SLOT - 2 * MARGIN) as i32;
    let ox = sx as i32 + MARGIN as i32 + rng.random_range(0..=room - (x1 - x0)) - x0;
    let oy = sy as i32 + MARGIN as i32 + rng.random_range(0..=room - (y1 - y0)) - y0;
    for &(a, b, c, d) in &rects {
        for py in (b + oy)..(d + oy) {
            for px in (a + ox)..(c + ox) {
                mask[(py as u32 * width + px as u32) as usize] = true;
            }
        }
    }
    BoundingBox::new(
        f64::from(x0 + ox),
        f64::from(y0 + oy),
        f64::from(x1 + ox),
        f64::from(y1 + oy),
    )
    .expect("cells have positive size")
}

fn render(rng: &mut ChaCha8Rng, mask: &[bool], width: u32, height: u32, colorspace: Colorspace) -> ImageBuffer {
    let (channels, bg, fg): (u8, [f64; 3], [f64; 3]) = match colorspace {
        Colorspace::Rgb => (3, [0.86, 0.80, 0.84], [0.30, 0.18, 0.34]),
        _ => (1, [0.82; 3], [0.26; 3]),
    };
    let mut data = Vec::with_capacity(mask.len() * channels as usize);
    for &on in mask {
        let base = if on { fg } else { bg };
        let noise = rng.random_range(-0.04..=0.04);
        data.extend(base[..channels as usize].iter().map(|v| v + noise));
    }
    ImageBuffer::new(width, height, channels, data).expect("intensities stay inside [0, 1]")
}
