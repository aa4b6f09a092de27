use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::{PairedSample, Plane};

use super::{NoiseKind, SynthParams, Upscale};

const CENTER: f64 = 127.5;

/// Single-channel noise in the `[0, 255]` domain, broadcast over channels
/// at composition time.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseField {
    plane: Plane,
    kind: NoiseKind,
    seed: u64,
}

impl NoiseField {
    pub fn from_plane(plane: Plane, kind: NoiseKind, seed: u64) -> Self {
        Self { plane, kind, seed }
    }

    pub fn plane(&self) -> &Plane {
        &self.plane
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

fn gaussian(h: usize, w: usize, seed: u64, params: &SynthParams) -> Result<Plane> {
    let normal = Normal::new(params.gauss_mean, params.gauss_sigma)
        .map_err(|e| Error::arg(format!("gaussian parameters: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..h * w)
        .map(|_| normal.sample(&mut rng).clamp(0.0, 255.0) as f32)
        .collect();
    Plane::new(h, w, data)
}

/// Resamples `src` to `h × w` with pixel-centre alignment and edge clamping.
pub fn upscale(src: &Plane, h: usize, w: usize, mode: Upscale) -> Plane {
    let (sh, sw) = (src.height(), src.width());
    let coord = |o: usize, n_out: usize, n_in: usize| (o as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5;
    let data = (0..h)
        .flat_map(|y| {
            (0..w).map(move |x| {
                let sy = coord(y, h, sh).clamp(0.0, (sh - 1) as f64);
                let sx = coord(x, w, sw).clamp(0.0, (sw - 1) as f64);
                match mode {
                    Upscale::Nearest => src.get(sy.round() as usize, sx.round() as usize),
                    Upscale::Bilinear => {
                        let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
                        let (y1, x1) = ((y0 + 1).min(sh - 1), (x0 + 1).min(sw - 1));
                        let (ty, tx) = (sy - y0 as f64, sx - x0 as f64);
                        let top = src.get(y0, x0) as f64 * (1.0 - tx) + src.get(y0, x1) as f64 * tx;
                        let bot = src.get(y1, x0) as f64 * (1.0 - tx) + src.get(y1, x1) as f64 * tx;
                        (top * (1.0 - ty) + bot * ty) as f32
                    }
                }
            })
        })
        .collect();
    Plane::new(h, w, data).expect("layout")
}

fn residual_noise(h: usize, w: usize, pair: &PairedSample, params: &SynthParams) -> Result<Plane> {
    let (ph, pw, _) = pair.clean().dims();
    if (ph, pw) != (h, w) {
        return Err(Error::DimensionMismatch {
            left: format!("noise {h}x{w}"),
            right: format!("residual source {ph}x{pw}"),
        });
    }
    let residual: Vec<f64> = crate::image::PerturbationMap::difference(pair.perturbed(), pair.clean())?
        .reduced()
        .into_iter()
        .map(|v| v * 255.0)
        .collect();
    let n = residual.len() as f64;
    let mean = residual.iter().sum::<f64>() / n;
    let var = residual.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let gain = if std > 1e-12 { params.gauss_sigma / std } else { 0.0 };
    let data = residual
        .iter()
        .map(|&r| (CENTER + gain * (r - mean)).clamp(0.0, 255.0) as f32)
        .collect();
    Plane::new(h, w, data)
}

/// Builds a noise field. Residual kinds need `source`, the clean/protected
/// pair whose difference supplies the texture.
pub fn make_noise(
    kind: NoiseKind,
    h: usize,
    w: usize,
    seed: u64,
    source: Option<&PairedSample>,
    params: &SynthParams,
) -> Result<NoiseField> {
    if h == 0 || w == 0 {
        return Err(Error::arg("noise dimensions must be non-zero"));
    }
    let plane = match kind {
        NoiseKind::Gauss => gaussian(h, w, seed, params)?,
        NoiseKind::Gauss2x | NoiseKind::Gauss4x => {
            let factor = if kind == NoiseKind::Gauss2x { 2 } else { 4 };
            let small = gaussian(h.div_ceil(factor), w.div_ceil(factor), seed, params)?;
            upscale(&small, h, w, params.upscale)
        }
        _ => {
            let pair = source.ok_or_else(|| {
                Error::arg(format!("noise kind {kind} needs a clean/protected source pair"))
            })?;
            residual_noise(h, w, pair, params)?
        }
    };
    Ok(NoiseField::from_plane(plane, kind, seed))
}
