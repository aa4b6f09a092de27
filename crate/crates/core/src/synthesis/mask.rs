use crate::error::{Error, Result};
use crate::image::Plane;

use super::perlin::{fbm, perlin_plane};
use super::{MaskKind, SynthParams};

const GAMMA_LO: f64 = 1e-3;
const GAMMA_HI: f64 = 1e3;
const GAMMA_ITERS: usize = 100;
/// Required agreement between a mask's mean and its target lightness.
pub const LIGHTNESS_TOLERANCE: f64 = 1e-4;

/// Single-channel spatial weight in `[0, 1]`. `lightness` is the sample mean.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    plane: Plane,
    kind: MaskKind,
    lightness: f64,
}

impl Mask {
    pub fn from_plane(plane: Plane, kind: MaskKind) -> Self {
        let lightness = mean(plane.data());
        Self {
            plane,
            kind,
            lightness,
        }
    }

    pub fn plane(&self) -> &Plane {
        &self.plane
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    pub fn lightness(&self) -> f64 {
        self.lightness
    }
}

fn mean(v: &[f32]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64
}

fn rescale_unit(plane: Plane) -> Plane {
    let (lo, hi) = plane
        .data()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return plane.map(|_| 0.5);
    }
    let span = hi - lo;
    plane.map(|v| ((v - lo) / span).clamp(0.0, 1.0))
}

/// Raw procedural mask, before any lightness targeting.
pub fn make_mask(kind: MaskKind, h: usize, w: usize, seed: u64, params: &SynthParams) -> Result<Mask> {
    if h < 2 || w < 2 {
        return Err(Error::arg(format!("mask dimensions {h}x{w} are degenerate (need >= 2x2)")));
    }
    let plane = match kind {
        MaskKind::Uniform => Plane::new(h, w, vec![1.0; h * w])?,
        MaskKind::RadialGradient => {
            let cy = (h as f64 - 1.0) / 2.0;
            let cx = (w as f64 - 1.0) / 2.0;
            let dmax = (cx * cx + cy * cy).sqrt();
            let data = (0..h)
                .flat_map(|y| {
                    (0..w).map(move |x| {
                        let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
                        (1.0 - d / dmax).clamp(0.0, 1.0) as f32
                    })
                })
                .collect();
            Plane::new(h, w, data)?
        }
        MaskKind::Directional => {
            let theta = params.directional_angle_deg.to_radians();
            let (s, c) = theta.sin_cos();
            let data = (0..h)
                .flat_map(|y| (0..w).map(move |x| (x as f64 * c + y as f64 * s) as f32))
                .collect();
            rescale_unit(Plane::new(h, w, data)?)
        }
        MaskKind::PerlinHi => {
            rescale_unit(perlin_plane(h, w, w as f64 / params.perlin_hi_divisor, seed))
        }
        MaskKind::PerlinLow => {
            rescale_unit(perlin_plane(h, w, w as f64 / params.perlin_low_divisor, seed))
        }
        MaskKind::Clouds2 => rescale_unit(fbm(
            h,
            w,
            w as f64 / params.clouds_base_divisor,
            params.clouds_octaves,
            params.clouds_persistence,
            seed,
        )),
    };
    Ok(Mask::from_plane(plane, kind))
}

fn gamma_mean(samples: &[f64], gamma: f64) -> f64 {
    samples.iter().map(|&x| x.powf(gamma)).sum::<f64>() / samples.len() as f64
}

/// Finds `γ ∈ [1e-3, 1e3]` with `mean(samples^γ) ≈ target` by bisection on
/// `ln γ`. The mean is non-increasing in `γ` for samples in `[0, 1]`.
pub fn solve_gamma(samples: &[f64], target: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::arg("empty mask"));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::arg(format!("lightness target must be in (0, 1), got {target}")));
    }
    let brightest = gamma_mean(samples, GAMMA_LO);
    let darkest = gamma_mean(samples, GAMMA_HI);
    if target > brightest + LIGHTNESS_TOLERANCE || target < darkest - LIGHTNESS_TOLERANCE {
        return Err(Error::Infeasible {
            target,
            lo: darkest,
            hi: brightest,
        });
    }
    let (mut lo, mut hi) = (GAMMA_LO.ln(), GAMMA_HI.ln());
    let mut best = (f64::INFINITY, 1.0);
    for _ in 0..GAMMA_ITERS {
        let mid = 0.5 * (lo + hi);
        let gamma = mid.exp();
        let m = gamma_mean(samples, gamma);
        let err = (m - target).abs();
        if err < best.0 {
            best = (err, gamma);
        }
        if err <= 1e-9 {
            break;
        }
        if m > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.0 > LIGHTNESS_TOLERANCE {
        return Err(Error::Infeasible {
            target,
            lo: darkest,
            hi: brightest,
        });
    }
    Ok(best.1)
}

/// Gamma-corrects `mask` so its mean equals `target`, keeping sample order.
pub fn adjust_lightness(mask: &Mask, target: f64) -> Result<Mask> {
    let samples: Vec<f64> = mask.plane.data().iter().map(|&v| v as f64).collect();
    let gamma = solve_gamma(&samples, target)?;
    let plane = mask.plane.map(|v| (v as f64).powf(gamma) as f32);
    let out = Mask::from_plane(plane, mask.kind);
    if (out.lightness - target).abs() > LIGHTNESS_TOLERANCE {
        return Err(Error::Infeasible {
            target,
            lo: out.lightness,
            hi: out.lightness,
        });
    }
    Ok(out)
}

/// Lightness targeting as used by the grid: gamma for structured masks,
/// plain scaling for `Uniform`, which gamma cannot move.
pub fn mask_at_lightness(mask: &Mask, target: f64) -> Result<Mask> {
    if mask.kind == MaskKind::Uniform {
        if !(target > 0.0 && target < 1.0) {
            return Err(Error::arg(format!("lightness target must be in (0, 1), got {target}")));
        }
        let scaled = mask.plane.map(|v| (v as f64 * target) as f32);
        return Ok(Mask::from_plane(scaled, mask.kind));
    }
    adjust_lightness(mask, target)
}
