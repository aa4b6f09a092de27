//! Controlled perturbation synthesis.
//!
//! Masks in `[0, 1]` shape *where* noise lands, noise fields in `[0, 255]`
//! decide *what* lands there, and [`compose`] adds `noise ⊙ mask · α` to an
//! 8-bit base image with clipping. [`grid`] runs the full
//! mask × noise × lightness product.

mod grid;
mod mask;
mod noise;
mod perlin;
mod proxy;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ImageU8, PairedSample, PerturbationMap};

pub use grid::{
    grid, read_grid_manifest, render, write_grid_manifest, GridOutput, GridRow, GridSpec,
    ResidualSources,
};
pub use mask::{adjust_lightness, make_mask, mask_at_lightness, solve_gamma, Mask};
pub use noise::{make_noise, upscale, NoiseField};
pub use perlin::{fbm, perlin_plane};
pub use proxy::{proxy_pair, ProxyProtection};

/// Default master opacity applied to every mask before composition.
pub const MASTER_OPACITY: f64 = 0.15;

/// The eight lightness levels of the standard grid.
pub const LIGHTNESS_LEVELS: [f64; 8] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskKind {
    Uniform,
    RadialGradient,
    Clouds2,
    Directional,
    PerlinHi,
    PerlinLow,
}

impl MaskKind {
    pub const ALL: [MaskKind; 6] = [
        MaskKind::Uniform,
        MaskKind::RadialGradient,
        MaskKind::Clouds2,
        MaskKind::Directional,
        MaskKind::PerlinHi,
        MaskKind::PerlinLow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MaskKind::Uniform => "uniform",
            MaskKind::RadialGradient => "radial-gradient",
            MaskKind::Clouds2 => "clouds2",
            MaskKind::Directional => "directional",
            MaskKind::PerlinHi => "perlin-hi",
            MaskKind::PerlinLow => "perlin-low",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Gauss,
    #[serde(rename = "gauss-2x")]
    Gauss2x,
    #[serde(rename = "gauss-4x")]
    Gauss4x,
    ResidualGlaze,
    ResidualShade,
    ResidualShadeGlaze,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 6] = [
        NoiseKind::Gauss,
        NoiseKind::Gauss2x,
        NoiseKind::Gauss4x,
        NoiseKind::ResidualGlaze,
        NoiseKind::ResidualShade,
        NoiseKind::ResidualShadeGlaze,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Gauss => "gauss",
            NoiseKind::Gauss2x => "gauss-2x",
            NoiseKind::Gauss4x => "gauss-4x",
            NoiseKind::ResidualGlaze => "residual-glaze",
            NoiseKind::ResidualShade => "residual-shade",
            NoiseKind::ResidualShadeGlaze => "residual-shade-glaze",
        }
    }

    pub fn is_residual(self) -> bool {
        matches!(
            self,
            NoiseKind::ResidualGlaze | NoiseKind::ResidualShade | NoiseKind::ResidualShadeGlaze
        )
    }
}

macro_rules! name_parsing {
    ($ty:ty, $what:literal) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                <$ty>::ALL
                    .into_iter()
                    .find(|k| k.name() == s)
                    .ok_or_else(|| Error::arg(format!(concat!("unknown ", $what, " '{}'"), s)))
            }
        }
    };
}

name_parsing!(MaskKind, "mask kind");
name_parsing!(NoiseKind, "noise kind");

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Upscale {
    #[default]
    Bilinear,
    Nearest,
}

/// Tunables for mask and noise generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub gauss_mean: f64,
    pub gauss_sigma: f64,
    pub upscale: Upscale,
    /// Perlin cell size is `width / divisor` pixels.
    pub perlin_hi_divisor: f64,
    pub perlin_low_divisor: f64,
    pub clouds_octaves: u32,
    pub clouds_persistence: f64,
    /// Cell size of the coarsest cloud octave is `width / divisor`.
    pub clouds_base_divisor: f64,
    pub directional_angle_deg: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            gauss_mean: 127.5,
            gauss_sigma: 40.0,
            upscale: Upscale::Bilinear,
            perlin_hi_divisor: 32.0,
            perlin_low_divisor: 4.0,
            clouds_octaves: 4,
            clouds_persistence: 0.5,
            clouds_base_divisor: 4.0,
            directional_angle_deg: 45.0,
        }
    }
}

/// One point of the synthesis grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub mask_kind: MaskKind,
    pub noise_kind: NoiseKind,
    pub lightness: f64,
    pub master_opacity: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(mask_kind: MaskKind, noise_kind: NoiseKind, lightness: f64, seed: u64) -> Self {
        Self {
            mask_kind,
            noise_kind,
            lightness,
            master_opacity: MASTER_OPACITY,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.master_opacity > 0.0 && self.master_opacity <= 1.0) {
            return Err(Error::arg(format!(
                "master opacity must be in (0, 1], got {}",
                self.master_opacity
            )));
        }
        if !(self.lightness > 0.0 && self.lightness < 1.0) {
            return Err(Error::arg(format!("lightness must be in (0, 1), got {}", self.lightness)));
        }
        Ok(())
    }
}

/// `clip(base + noise ⊙ mask · master_opacity, 0, 255)`, rounded to 8 bits.
///
/// Mask and noise are single-channel and broadcast over the base channels.
pub fn compose(
    base: &ImageU8,
    noise: &NoiseField,
    mask: &Mask,
    master_opacity: f64,
) -> Result<ImageU8> {
    let (h, w, c) = base.dims();
    let m = mask.plane();
    let n = noise.plane();
    if (m.height(), m.width()) != (h, w) || (n.height(), n.width()) != (h, w) {
        return Err(Error::DimensionMismatch {
            left: format!("base {h}x{w}"),
            right: format!(
                "mask {}x{}, noise {}x{}",
                m.height(),
                m.width(),
                n.height(),
                n.width()
            ),
        });
    }
    let data = base
        .data()
        .chunks_exact(c)
        .zip(m.data().iter().zip(n.data()))
        .flat_map(|(px, (&mv, &nv))| {
            let scaled = mv as f64 * master_opacity;
            let inc = nv as f64 * scaled;
            px.iter()
                .map(move |&b| (b as f64 + inc).clamp(0.0, 255.0).round() as u8)
        })
        .collect();
    ImageU8::new(h, w, c, data)
}

/// Signed `perturbed − clean`, held exactly.
pub fn extract_residual(pair: &PairedSample) -> Result<PerturbationMap> {
    PerturbationMap::difference(pair.perturbed(), pair.clean())
}

/// Stable 64-bit stream id derived from a master seed and a tag.
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(format!("{master}:{tag}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{ImageF32, Plane};
    use proptest::prelude::*;

    fn flat_mask(h: usize, w: usize, v: f32) -> Mask {
        Mask::from_plane(Plane::new(h, w, vec![v; h * w]).unwrap(), MaskKind::Uniform)
    }

    fn flat_noise(h: usize, w: usize, v: f32) -> NoiseField {
        NoiseField::from_plane(Plane::new(h, w, vec![v; h * w]).unwrap(), NoiseKind::Gauss, 0)
    }

    #[test]
    fn compose_matches_hand_arithmetic() {
        let base = ImageU8::filled(4, 4, 3, 100).unwrap();
        let out = compose(&base, &flat_noise(4, 4, 200.0), &flat_mask(4, 4, 1.0), 0.15).unwrap();
        assert!(out.data().iter().all(|&v| v == 130));

        let base = ImageU8::filled(4, 4, 3, 250).unwrap();
        let out = compose(&base, &flat_noise(4, 4, 255.0), &flat_mask(4, 4, 1.0), 0.15).unwrap();
        assert!(out.data().iter().all(|&v| v == 255));

        let base = ImageU8::new(2, 2, 1, vec![3, 90, 180, 255]).unwrap();
        let out = compose(&base, &flat_noise(2, 2, 255.0), &flat_mask(2, 2, 0.0), 0.15).unwrap();
        assert_eq!(out, base);
    }

    #[test]
    fn compose_rejects_mismatched_dims() {
        let base = ImageU8::filled(4, 4, 3, 100).unwrap();
        let err = compose(&base, &flat_noise(4, 5, 1.0), &flat_mask(4, 4, 1.0), 0.15);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn residual_examples() {
        let clean = ImageF32::new(1, 2, 1, vec![0.2, 0.7]).unwrap();
        let same = PairedSample::new(clean.clone(), clean.clone(), "x").unwrap();
        assert!(extract_residual(&same).unwrap().data().iter().all(|&v| v == 0.0));

        let pert = ImageF32::new(1, 2, 1, vec![0.5, 0.7]).unwrap();
        let pair = PairedSample::new(clean, pert, "x").unwrap();
        let d = extract_residual(&pair).unwrap();
        assert!((d.data()[0] - 0.3).abs() < 1e-7);
        assert_eq!(d.data()[1], 0.0);
    }

    #[test]
    fn residual_rejects_mismatched_pair() {
        let a = ImageF32::filled(2, 2, 3, 0.0).unwrap();
        let b = ImageF32::filled(2, 3, 3, 0.0).unwrap();
        assert!(PairedSample::new(a, b, "x").is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in MaskKind::ALL {
            assert_eq!(k.name().parse::<MaskKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        for k in NoiseKind::ALL {
            assert_eq!(k.name().parse::<NoiseKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert!("plaid".parse::<MaskKind>().is_err());
    }

    #[test]
    fn synth_spec_validation() {
        let mut s = SynthSpec::new(MaskKind::Uniform, NoiseKind::Gauss, 0.5, 1);
        assert!(s.validate().is_ok());
        s.master_opacity = 0.0;
        assert!(s.validate().is_err());
        s.master_opacity = 0.15;
        s.lightness = 1.0;
        assert!(s.validate().is_err());
    }

    proptest! {
        #[test]
        fn residual_reconstructs_perturbed_exactly(
            px in proptest::collection::vec((0u8..=255, 0u8..=255), 1..64)
        ) {
            let n = px.len();
            let c = ImageF32::new(1, n, 1, px.iter().map(|p| p.0 as f32 / 255.0).collect()).unwrap();
            let p = ImageF32::new(1, n, 1, px.iter().map(|p| p.1 as f32 / 255.0).collect()).unwrap();
            let pair = PairedSample::new(c.clone(), p.clone(), "x").unwrap();
            let d = extract_residual(&pair).unwrap();
            for ((&cv, &dv), &pv) in c.data().iter().zip(d.data()).zip(p.data()) {
                prop_assert!((-1.0..=1.0).contains(&dv));
                prop_assert_eq!((cv as f64 + dv) as f32, pv);
                prop_assert_eq!(cv as f64 + dv, pv as f64);
            }
        }

        #[test]
        fn compose_increment_is_bounded(
            base in proptest::collection::vec(any::<u8>(), 16),
            noise in proptest::collection::vec(0f32..=255.0, 16),
            mask in proptest::collection::vec(0f32..=1.0, 16),
            opacity in 0.01f64..=1.0,
        ) {
            let b = ImageU8::new(4, 4, 1, base).unwrap();
            let n = NoiseField::from_plane(Plane::new(4, 4, noise).unwrap(), NoiseKind::Gauss, 0);
            let m = Mask::from_plane(Plane::new(4, 4, mask).unwrap(), MaskKind::Clouds2);
            let out = compose(&b, &n, &m, opacity).unwrap();
            let bound = (255.0 * opacity).ceil() as i32;
            for (&o, &bv) in out.data().iter().zip(b.data()) {
                prop_assert!(o >= bv);
                prop_assert!(o as i32 - bv as i32 <= bound);
            }
        }
    }
}
