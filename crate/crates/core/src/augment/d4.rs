//! The eight symmetries of the square acting on images and boxes.
//!
//! Rotations are counterclockwise as seen on screen (y pointing down).
//! `FlipH` mirrors across the vertical axis, `FlipV` across the horizontal
//! axis, `Transpose` swaps x and y, and `AntiTranspose` reflects across the
//! anti-diagonal.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::BoundingBox;
use crate::raster::ImageBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum D4Element {
    Identity,
    Rot90,
    Rot180,
    Rot270,
    FlipH,
    FlipV,
    Transpose,
    AntiTranspose,
}

/// Signed permutation matrix acting on centered coordinates `(u, v)`:
/// `u' = a*u + b*v`, `v' = c*u + d*v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Linear([i8; 4]);

impl Linear {
    fn mul(self, rhs: Linear) -> Linear {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = rhs.0;
        Linear([a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h])
    }
}

impl D4Element {
    pub const ALL: [D4Element; 8] = [
        D4Element::Identity,
        D4Element::Rot90,
        D4Element::Rot180,
        D4Element::Rot270,
        D4Element::FlipH,
        D4Element::FlipV,
        D4Element::Transpose,
        D4Element::AntiTranspose,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            D4Element::Identity => "id",
            D4Element::Rot90 => "rot90",
            D4Element::Rot180 => "rot180",
            D4Element::Rot270 => "rot270",
            D4Element::FlipH => "fliph",
            D4Element::FlipV => "flipv",
            D4Element::Transpose => "transpose",
            D4Element::AntiTranspose => "antitranspose",
        }
    }

    fn linear(self) -> Linear {
        Linear(match self {
            D4Element::Identity => [1, 0, 0, 1],
            D4Element::Rot90 => [0, 1, -1, 0],
            D4Element::Rot180 => [-1, 0, 0, -1],
            D4Element::Rot270 => [0, -1, 1, 0],
            D4Element::FlipH => [-1, 0, 0, 1],
            D4Element::FlipV => [1, 0, 0, -1],
            D4Element::Transpose => [0, 1, 1, 0],
            D4Element::AntiTranspose => [0, -1, -1, 0],
        })
    }

    fn from_linear(m: Linear) -> D4Element {
        Self::ALL
            .into_iter()
            .find(|g| g.linear() == m)
            .expect("D4 is closed under composition")
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(self, other: D4Element) -> D4Element {
        Self::from_linear(self.linear().mul(other.linear()))
    }

    pub fn inverse(self) -> D4Element {
        match self {
            D4Element::Rot90 => D4Element::Rot270,
            D4Element::Rot270 => D4Element::Rot90,
            g => g,
        }
    }

    /// Whether the output frame swaps width and height.
    pub fn swaps_axes(self) -> bool {
        matches!(
            self,
            D4Element::Rot90 | D4Element::Rot270 | D4Element::Transpose | D4Element::AntiTranspose
        )
    }

    pub fn output_size(self, width: u32, height: u32) -> (u32, u32) {
        if self.swaps_axes() {
            (height, width)
        } else {
            (width, height)
        }
    }

    /// Maps a continuous point of a `width x height` frame into the
    /// transformed frame.
    pub fn map_point(self, x: f64, y: f64, width: f64, height: f64) -> (f64, f64) {
        match self {
            D4Element::Identity => (x, y),
            D4Element::Rot90 => (y, width - x),
            D4Element::Rot180 => (width - x, height - y),
            D4Element::Rot270 => (height - y, x),
            D4Element::FlipH => (width - x, y),
            D4Element::FlipV => (x, height - y),
            D4Element::Transpose => (y, x),
            D4Element::AntiTranspose => (height - y, width - x),
        }
    }

    /// Integer pixel map: source pixel `(col, row)` lands at the returned
    /// pixel of the output grid.
    fn map_pixel(self, col: u32, row: u32, width: u32, height: u32) -> (u32, u32) {
        match self {
            D4Element::Identity => (col, row),
            D4Element::Rot90 => (row, width - 1 - col),
            D4Element::Rot180 => (width - 1 - col, height - 1 - row),
            D4Element::Rot270 => (height - 1 - row, col),
            D4Element::FlipH => (width - 1 - col, row),
            D4Element::FlipV => (col, height - 1 - row),
            D4Element::Transpose => (row, col),
            D4Element::AntiTranspose => (height - 1 - row, width - 1 - col),
        }
    }
}

impl fmt::Display for D4Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for D4Element {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| format!("unknown D4 element {s:?}"))
    }
}

impl TryFrom<String> for D4Element {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<D4Element> for String {
    fn from(g: D4Element) -> Self {
        g.name().to_string()
    }
}

/// Permutes the pixel grid; intensities are moved, never altered.
pub fn apply_d4_image(img: &ImageBuffer, g: D4Element) -> ImageBuffer {
    let (w, h) = (img.width(), img.height());
    let (ow, oh) = g.output_size(w, h);
    let ch = img.channels() as usize;
    let mut out = vec![0.0; img.data().len()];
    for row in 0..h {
        for col in 0..w {
            let (oc, or) = g.map_pixel(col, row, w, h);
            let dst = (or as usize * ow as usize + oc as usize) * ch;
            out[dst..dst + ch].copy_from_slice(img.pixel(col, row));
        }
    }
    ImageBuffer::from_parts(ow, oh, img.channels(), out)
}

/// Transforms a box of a `width x height` image into the transformed frame.
/// Area and the enclosed region are preserved exactly.
pub fn apply_d4_box(b: &BoundingBox, g: D4Element, width: u32, height: u32) -> BoundingBox {
    let (w, h) = (f64::from(width), f64::from(height));
    let (x0, y0) = g.map_point(b.xmin(), b.ymin(), w, h);
    let (x1, y1) = g.map_point(b.xmax(), b.ymax(), w, h);
    BoundingBox::new(x0.min(x1), y0.min(y1), x0.max(x1), y0.max(y1))
        .expect("D4 maps a valid box to a valid box")
}
