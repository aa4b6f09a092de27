//! Sliding-window occlusion sensitivity.
//!
//! For every window position on the stride lattice the clean image is
//! blanked inside the window and the mean absolute difference to the
//! perturbed image is taken over the whole image. That scalar is written
//! back over the window, giving a map of where the perturbation leans on
//! clean-image content.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ImageF32, PairedSample, Plane};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapMode {
    /// Later windows overwrite earlier ones (row-major scan order).
    #[default]
    Overwrite,
    /// Each pixel gets the mean score of the windows covering it.
    Average,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OcclusionConfig {
    pub window: usize,
    pub stride: usize,
    pub baseline_value: f32,
    pub overlap_mode: OverlapMode,
}

impl Default for OcclusionConfig {
    fn default() -> Self {
        Self {
            window: 32,
            stride: 16,
            baseline_value: 0.0,
            overlap_mode: OverlapMode::Overwrite,
        }
    }
}

impl OcclusionConfig {
    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        let (w, s) = (self.window, self.stride);
        if s == 0 || w == 0 {
            return Err(Error::arg("window and stride must be positive"));
        }
        if s > w {
            return Err(Error::arg(format!("stride {s} exceeds window {w}")));
        }
        if w > height.min(width) {
            return Err(Error::arg(format!(
                "window {w} larger than image {height}x{width}"
            )));
        }
        Ok(())
    }
}

/// Non-negative single-channel map with the settings that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityInfo {
    pub window: usize,
    pub stride: usize,
    pub overlap_mode: OverlapMode,
    pub normalized: bool,
    /// Pixels no full window reached; they stay 0.
    pub uncovered_pixels: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityMap {
    pub plane: Plane,
    pub info: SensitivityInfo,
}

/// Summed-area table of a per-pixel quantity, `(h + 1) × (w + 1)`.
struct Integral {
    w: usize,
    sums: Vec<f64>,
}

impl Integral {
    fn new(h: usize, w: usize, values: &[f64]) -> Self {
        let stride = w + 1;
        let mut sums = vec![0.0; (h + 1) * stride];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += values[y * w + x];
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { w, sums }
    }

    fn window(&self, y: usize, x: usize, size: usize) -> f64 {
        let s = self.w + 1;
        let (y1, x1) = (y + size, x + size);
        self.sums[y1 * s + x1] - self.sums[y * s + x1] - self.sums[y1 * s + x] + self.sums[y * s + x]
    }
}

fn lattice(len: usize, window: usize, stride: usize) -> impl Iterator<Item = usize> + Clone {
    (0..=len - window).step_by(stride)
}

/// Occlusion sensitivity map of a clean/perturbed pair.
///
/// Scores are `Σ|b_occ − p| / (H·W·C)`. Window sums come from summed-area
/// tables in `f64`; for inputs whose samples are 8-bit values scaled to the
/// unit interval every partial sum is exact, so the result is bit-identical
/// to recomputing the full-image sum per window.
pub fn sensitivity_map(pair: &PairedSample, cfg: &OcclusionConfig) -> Result<SensitivityMap> {
    let clean = pair.clean();
    let pert = pair.perturbed();
    let (h, w, c) = clean.dims();
    cfg.validate(h, w)?;

    let base = cfg.baseline_value as f64;
    let mut diff = vec![0.0f64; h * w];
    let mut occl = vec![0.0f64; h * w];
    for (i, (cp, pp)) in clean
        .data()
        .chunks_exact(c)
        .zip(pert.data().chunks_exact(c))
        .enumerate()
    {
        for (&cv, &pv) in cp.iter().zip(pp) {
            diff[i] += (cv as f64 - pv as f64).abs();
            occl[i] += (base - pv as f64).abs();
        }
    }
    let total: f64 = diff.iter().sum();
    let diff_sat = Integral::new(h, w, &diff);
    let occl_sat = Integral::new(h, w, &occl);
    let n = (h * w * c) as f64;

    let ys: Vec<usize> = lattice(h, cfg.window, cfg.stride).collect();
    let xs: Vec<usize> = lattice(w, cfg.window, cfg.stride).collect();
    let positions: Vec<(usize, usize)> = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| (y, x)))
        .collect();
    let scores: Vec<f64> = positions
        .par_iter()
        .map(|&(y, x)| {
            let inside = diff_sat.window(y, x, cfg.window);
            let blanked = occl_sat.window(y, x, cfg.window);
            (total - inside + blanked) / n
        })
        .collect();

    Ok(commit(h, w, cfg, &positions, &scores))
}

fn commit(
    h: usize,
    w: usize,
    cfg: &OcclusionConfig,
    positions: &[(usize, usize)],
    scores: &[f64],
) -> SensitivityMap {
    let win = cfg.window;
    let mut data = vec![0.0f32; h * w];
    let mut hits = vec![0u32; h * w];
    match cfg.overlap_mode {
        OverlapMode::Overwrite => {
            for (&(y, x), &s) in positions.iter().zip(scores) {
                for yy in y..y + win {
                    for xx in x..x + win {
                        data[yy * w + xx] = s as f32;
                        hits[yy * w + xx] += 1;
                    }
                }
            }
        }
        OverlapMode::Average => {
            let mut acc = vec![0.0f64; h * w];
            for (&(y, x), &s) in positions.iter().zip(scores) {
                for yy in y..y + win {
                    for xx in x..x + win {
                        acc[yy * w + xx] += s;
                        hits[yy * w + xx] += 1;
                    }
                }
            }
            for ((d, a), &k) in data.iter_mut().zip(&acc).zip(&hits) {
                if k > 0 {
                    *d = (a / k as f64) as f32;
                }
            }
        }
    }
    let uncovered = hits.iter().filter(|&&k| k == 0).count();
    SensitivityMap {
        plane: Plane::new(h, w, data).expect("layout"),
        info: SensitivityInfo {
            window: cfg.window,
            stride: cfg.stride,
            overlap_mode: cfg.overlap_mode,
            normalized: false,
            uncovered_pixels: uncovered,
        },
    }
}

/// Min-max scales to `[0, 1]`. A zero map stays zero; a constant non-zero
/// map becomes all ones.
pub fn normalize_map(map: &SensitivityMap) -> SensitivityMap {
    let data = map.plane.data();
    let (lo, hi) = data
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let plane = if data.is_empty() || hi == 0.0 && lo == 0.0 {
        map.plane.clone()
    } else if hi == lo {
        map.plane.map(|_| 1.0)
    } else {
        let span = hi - lo;
        map.plane.map(|v| (v - lo) / span)
    };
    SensitivityMap {
        plane,
        info: SensitivityInfo {
            normalized: true,
            ..map.info.clone()
        },
    }
}

/// Pixelwise mean of several maps of equal size.
pub fn aggregate_maps(maps: &[SensitivityMap]) -> Result<SensitivityMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::arg("cannot aggregate an empty list of maps"))?;
    let mut acc = vec![0.0f64; first.plane.data().len()];
    for m in maps {
        first.plane.same_dims(&m.plane)?;
        for (a, &v) in acc.iter_mut().zip(m.plane.data()) {
            *a += v as f64;
        }
    }
    let k = maps.len() as f64;
    let plane = Plane::new(
        first.plane.height(),
        first.plane.width(),
        acc.into_iter().map(|v| (v / k) as f32).collect(),
    )?;
    Ok(SensitivityMap {
        plane,
        info: SensitivityInfo {
            normalized: maps.iter().all(|m| m.info.normalized),
            uncovered_pixels: maps.iter().map(|m| m.info.uncovered_pixels).min().unwrap_or(0),
            ..first.info.clone()
        },
    })
}

/// Contrast-compressed absolute difference `|a − b|^gamma` of two
/// normalized maps. Larger means more different.
pub fn map_difference(a: &SensitivityMap, b: &SensitivityMap, gamma: f32) -> Result<ImageF32> {
    a.plane.same_dims(&b.plane)?;
    if !a.info.normalized || !b.info.normalized {
        return Err(Error::arg("map_difference expects normalized maps"));
    }
    if !(gamma > 0.0) {
        return Err(Error::arg(format!("gamma must be positive, got {gamma}")));
    }
    let data = a
        .plane
        .data()
        .iter()
        .zip(b.plane.data())
        .map(|(&x, &y)| (x - y).abs().powf(gamma).min(1.0))
        .collect();
    ImageF32::new(a.plane.height(), a.plane.width(), 1, data)
}
