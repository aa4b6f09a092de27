use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{format_dims, ImageF32, PerturbationMap};

use super::external::ExternalReconstructor;

/// Estimates the perturbation carried by `image`.
pub trait Reconstructor: Send + Sync {
    /// `clean_ref` is only consulted by reconstructors that need a pair.
    fn reconstruct(&self, image: &ImageF32, clean_ref: Option<&ImageF32>) -> Result<PerturbationMap>;
    fn id(&self) -> String;
}

/// Returns the stored ground-truth field.
#[derive(Clone, Debug)]
pub struct Oracle {
    delta: PerturbationMap,
}

impl Oracle {
    pub fn new(delta: PerturbationMap) -> Self {
        Self { delta }
    }
}

impl Reconstructor for Oracle {
    fn reconstruct(&self, image: &ImageF32, _: Option<&ImageF32>) -> Result<PerturbationMap> {
        if (self.delta.height(), self.delta.width()) != (image.height(), image.width()) {
            return Err(Error::DimensionMismatch {
                left: format_dims(image.dims()),
                right: format_dims((self.delta.height(), self.delta.width(), self.delta.channels())),
            });
        }
        Ok(self.delta.clone())
    }

    fn id(&self) -> String {
        "oracle".into()
    }
}

/// `image − clean`, exact in f64.
#[derive(Clone, Copy, Debug, Default)]
pub struct PairedDiff;

impl Reconstructor for PairedDiff {
    fn reconstruct(&self, image: &ImageF32, clean_ref: Option<&ImageF32>) -> Result<PerturbationMap> {
        let clean = clean_ref.ok_or_else(|| Error::arg("paired reconstructor needs the clean image"))?;
        PerturbationMap::difference(image, clean)
    }

    fn id(&self) -> String {
        "paired-diff".into()
    }
}

/// `image − median5x5(image)` per channel. A blind, crude estimate.
#[derive(Clone, Copy, Debug)]
pub struct HighPassResidual {
    pub radius: usize,
}

impl Default for HighPassResidual {
    fn default() -> Self {
        Self { radius: 2 }
    }
}

impl Reconstructor for HighPassResidual {
    fn reconstruct(&self, image: &ImageF32, _: Option<&ImageF32>) -> Result<PerturbationMap> {
        let smooth = median_filter(image, self.radius);
        let (h, w, c) = image.dims();
        let data = image
            .data()
            .iter()
            .zip(smooth.data())
            .map(|(&x, &m)| x as f64 - m as f64)
            .collect();
        PerturbationMap::new(h, w, c, data)
    }

    fn id(&self) -> String {
        format!("highpass-median{}", 2 * self.radius + 1)
    }
}

/// Per-channel median over a `(2r+1)²` window with clamped borders.
pub fn median_filter(image: &ImageF32, radius: usize) -> ImageF32 {
    let (h, w, c) = image.dims();
    let src = image.data();
    let r = radius as isize;
    let side = 2 * radius + 1;
    let mut window = Vec::with_capacity(side * side);
    let mut out = vec![0.0f32; src.len()];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                window.clear();
                for dy in -r..=r {
                    let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    for dx in -r..=r {
                        let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                        window.push(src[(yy * w + xx) * c + ch]);
                    }
                }
                let mid = window.len() / 2;
                let (_, m, _) = window.select_nth_unstable_by(mid, f32::total_cmp);
                out[(y * w + x) * c + ch] = *m;
            }
        }
    }
    ImageF32::new(h, w, c, out).expect("same layout")
}

/// Reconstructor selection as written on the command line and in configs:
/// `oracle`, `paired`, `highpass`, or `external:<command>`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ReconstructorKind {
    Oracle,
    Paired,
    HighPass,
    External(String),
}

impl ReconstructorKind {
    /// Builds the reconstructor. `oracle_delta` is required for `Oracle`.
    pub fn build(
        &self,
        oracle_delta: Option<PerturbationMap>,
        timeout: Duration,
    ) -> Result<Box<dyn Reconstructor>> {
        Ok(match self {
            Self::Oracle => Box::new(Oracle::new(
                oracle_delta.ok_or_else(|| Error::arg("oracle reconstructor needs a ground-truth map"))?,
            )),
            Self::Paired => Box::new(PairedDiff),
            Self::HighPass => Box::new(HighPassResidual::default()),
            Self::External(cmd) => Box::new(ExternalReconstructor::from_command(cmd, timeout)?),
        })
    }

    pub fn is_external(&self) -> bool {
        matches!(self, Self::External(_))
    }
}

impl fmt::Display for ReconstructorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Oracle => f.write_str("oracle"),
            Self::Paired => f.write_str("paired"),
            Self::HighPass => f.write_str("highpass"),
            Self::External(cmd) => write!(f, "external:{cmd}"),
        }
    }
}

impl FromStr for ReconstructorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "paired" => Ok(Self::Paired),
            "highpass" => Ok(Self::HighPass),
            _ => match s.strip_prefix("external:") {
                Some(cmd) if !cmd.trim().is_empty() => Ok(Self::External(cmd.trim().to_string())),
                _ => Err(Error::arg(format!(
                    "unknown reconstructor {s:?} (expected oracle, paired, highpass or external:CMD)"
                ))),
            },
        }
    }
}

impl TryFrom<String> for ReconstructorKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ReconstructorKind> for String {
    fn from(k: ReconstructorKind) -> String {
        k.to_string()
    }
}
