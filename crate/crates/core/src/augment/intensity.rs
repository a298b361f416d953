//! Power-law (gamma) intensity mapping and luma grayscale conversion.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AugmentError;
use crate::raster::ImageBuffer;

/// Positive rational exponent. Kept as a fraction so derived image ids can
/// spell it exactly (`g3x4` for 3/4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Gamma {
    num: u32,
    den: u32,
}

impl Gamma {
    pub const ONE: Gamma = Gamma { num: 1, den: 1 };

    /// Reduced fraction `num / den`; both must be positive.
    pub fn new(num: u32, den: u32) -> Result<Self, AugmentError> {
        if num == 0 || den == 0 {
            return Err(AugmentError::Gamma(format!("{num}/{den}")));
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn num(self) -> u32 {
        self.num
    }
    pub fn den(self) -> u32 {
        self.den
    }

    pub fn value(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }

    /// Id fragment, e.g. `g5x4`.
    pub fn tag(self) -> String {
        format!("g{}x{}", self.num, self.den)
    }

    /// The exponents used for the ×5 intensity boost: 3/4, 4/5, 1, 5/4, 4/3.
    pub fn default_schedule() -> Vec<Gamma> {
        [(3, 4), (4, 5), (1, 1), (5, 4), (4, 3)]
            .into_iter()
            .map(|(n, d)| Gamma { num: n, den: d })
            .collect()
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Gamma {
    type Err = AugmentError;

    /// Accepts `n` or `n/d`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AugmentError::Gamma(s.to_string());
        let (n, d) = match s.trim().split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s.trim(), "1"),
        };
        Gamma::new(n.parse().map_err(|_| bad())?, d.parse().map_err(|_| bad())?)
    }
}

impl TryFrom<String> for Gamma {
    type Error = AugmentError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Gamma> for String {
    fn from(g: Gamma) -> Self {
        g.to_string()
    }
}

/// Parameters of `o = c * i^gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawParams {
    pub c: f64,
    pub gamma: Gamma,
}

impl PowerLawParams {
    pub fn new(c: f64, gamma: Gamma) -> Result<Self, AugmentError> {
        if !(c.is_finite() && c > 0.0) {
            return Err(AugmentError::Scale(c));
        }
        Ok(Self { c, gamma })
    }

    pub fn unit(gamma: Gamma) -> Self {
        Self { c: 1.0, gamma }
    }
}

/// Applies `o = c * i^gamma` to every channel of every pixel.
///
/// Fails when `c > 1`, since the brightest input would leave `[0, 1]`; use
/// [`power_law_clamped`] to saturate instead.
pub fn power_law(img: &ImageBuffer, p: PowerLawParams) -> Result<ImageBuffer, AugmentError> {
    if p.c > 1.0 {
        return Err(AugmentError::RangeViolation { c: p.c });
    }
    Ok(map_intensity(img, p, false))
}

pub fn power_law_clamped(img: &ImageBuffer, p: PowerLawParams) -> ImageBuffer {
    map_intensity(img, p, true)
}

fn map_intensity(img: &ImageBuffer, p: PowerLawParams, clamp: bool) -> ImageBuffer {
    if p.c == 1.0 && p.gamma == Gamma::ONE {
        return img.clone();
    }
    let g = p.gamma.value();
    let data = img
        .data()
        .iter()
        .map(|&i| {
            let o = p.c * i.powf(g);
            if clamp {
                o.min(1.0)
            } else {
                o
            }
        })
        .collect();
    ImageBuffer::from_parts(img.width(), img.height(), img.channels(), data)
}

pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Single-channel luma image; single-channel input is returned unchanged.
pub fn to_grayscale(img: &ImageBuffer) -> ImageBuffer {
    if img.channels() == 1 {
        return img.clone();
    }
    let data = img
        .data()
        .chunks_exact(3)
        .map(|px| {
            let y = LUMA_WEIGHTS[0] * px[0] + LUMA_WEIGHTS[1] * px[1] + LUMA_WEIGHTS[2] * px[2];
            y.clamp(0.0, 1.0)
        })
        .collect();
    ImageBuffer::from_parts(img.width(), img.height(), 1, data)
}
