//! Entropy-threshold detection and subtraction purification.
//!
//! A [`Reconstructor`] estimates the perturbation `δ̂` carried by an image.
//! Detection histograms the per-image min-max normalized `|δ̂|` and flags
//! the image when its Shannon entropy exceeds a threshold; purification
//! returns `clip(x − δ̂, 0, 1)`.
//!
//! Entropy values here use 256 bins and base 2. They are comparable with
//! each other, not with figures produced by other tools' binning.

mod batch;
mod external;
mod reconstruct;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ImageF32, PerturbationMap};

pub use batch::{batch_detect, summarize, summary_csv, BatchDetection, BatchSample, DetectionRow, SummaryRow};
pub use external::ExternalReconstructor;
pub use reconstruct::{
    median_filter, HighPassResidual, Oracle, PairedDiff, Reconstructor, ReconstructorKind,
};

/// Threshold in bits inherited from the reference detector's default.
pub const DEFAULT_THRESHOLD: f64 = 0.07;
pub const DEFAULT_BINS: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub entropy: f64,
    pub threshold: f64,
    pub detected: bool,
    pub reconstructor_id: String,
    pub histogram_bins: usize,
}

/// Histogram entropy (bits) of min-max normalized magnitudes.
pub fn entropy_of(values: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::arg(format!("need at least 2 histogram bins, got {bins}")));
    }
    if values.is_empty() {
        return Err(Error::arg("entropy of an empty map"));
    }
    let (lo, hi) = values
        .iter()
        .map(|v| v.abs())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let mut counts = vec![0u64; bins];
    if hi > lo {
        let span = hi - lo;
        for v in values {
            let t = (v.abs() - lo) / span;
            let b = ((t * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
    } else {
        counts[0] = values.len() as u64;
    }
    let n = values.len() as f64;
    let h = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>();
    Ok(h.max(0.0))
}

/// Entropy of the channel-mean view of `map`.
pub fn shannon_entropy(map: &PerturbationMap, bins: usize) -> Result<f64> {
    entropy_of(&map.reduced(), bins)
}

/// Reconstructs `δ̂`, measures its entropy and compares with `threshold`.
/// Returns the map too so callers can persist it.
pub fn detect(
    image: &ImageF32,
    rec: &dyn Reconstructor,
    threshold: f64,
    clean_ref: Option<&ImageF32>,
    bins: usize,
) -> Result<(DetectionResult, PerturbationMap)> {
    let delta = rec.reconstruct(image, clean_ref)?;
    let entropy = shannon_entropy(&delta, bins)?;
    Ok((
        DetectionResult {
            entropy,
            threshold,
            detected: entropy > threshold,
            reconstructor_id: rec.id(),
            histogram_bins: bins,
        },
        delta,
    ))
}

/// `clip(x − δ̂, 0, 1)`. A single-channel `δ̂` is broadcast across channels.
pub fn subtract(image: &ImageF32, delta: &PerturbationMap) -> Result<ImageF32> {
    let (h, w, c) = image.dims();
    if (delta.height(), delta.width()) != (h, w) || (delta.channels() != 1 && delta.channels() != c) {
        return Err(Error::DimensionMismatch {
            left: crate::image::format_dims(image.dims()),
            right: crate::image::format_dims((delta.height(), delta.width(), delta.channels())),
        });
    }
    let dc = delta.channels();
    let data = image
        .data()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let d = if dc == 1 { delta.data()[i / c] } else { delta.data()[i] };
            (x as f64 - d).clamp(0.0, 1.0) as f32
        })
        .collect();
    ImageF32::new(h, w, c, data)
}

pub fn purify(image: &ImageF32, rec: &dyn Reconstructor, clean_ref: Option<&ImageF32>) -> Result<ImageF32> {
    let delta = rec.reconstruct(image, clean_ref)?;
    subtract(image, &delta)
}

/// Peak signal-to-noise ratio in dB for unit-range images.
pub fn psnr(a: &ImageF32, b: &ImageF32) -> Result<f64> {
    a.same_dims(b)?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        / a.data().len() as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    })
}
