//! Deterministic stand-ins for tool-protected images.
//!
//! Residual noise kinds are meant to be fed from real clean/protected pairs.
//! When none are available these proxies give the pipeline something with a
//! comparable shape: a broad low-frequency field, a fine content-modulated
//! texture, and the two applied in sequence. They are proxies, not
//! reproductions of any protection tool.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::{u8_to_f32, ImageU8, PairedSample};

use super::perlin::{fbm, perlin_plane};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProxyProtection {
    /// Smooth, image-wide low-frequency drift (±4 levels).
    SmoothField,
    /// Fine texture scaled by local edge strength (±6 levels).
    FineTexture,
    /// `FineTexture` then `SmoothField`, each quantized to 8 bits.
    Stacked,
}

impl ProxyProtection {
    pub fn label(self) -> &'static str {
        match self {
            ProxyProtection::SmoothField => "proxy-smooth",
            ProxyProtection::FineTexture => "proxy-texture",
            ProxyProtection::Stacked => "proxy-stacked",
        }
    }
}

fn normalize_sym(v: &mut [f32]) {
    let peak = v.iter().fold(0.0f32, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        v.iter_mut().for_each(|x| *x /= peak);
    }
}

fn edge_strength(img: &ImageU8) -> Vec<f32> {
    let (h, w, c) = img.dims();
    let lum = |y: usize, x: usize| {
        let px = &img.data()[(y * w + x) * c..(y * w + x + 1) * c];
        px.iter().map(|&v| v as f32).sum::<f32>() / c as f32
    };
    let mut out = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let gx = lum(y, (x + 1).min(w - 1)) - lum(y, x.saturating_sub(1));
            let gy = lum((y + 1).min(h - 1), x) - lum(y.saturating_sub(1), x);
            out[y * w + x] = (gx * gx + gy * gy).sqrt();
        }
    }
    let peak = out.iter().fold(0.0f32, |m, &v| m.max(v));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v /= peak);
    }
    out
}

fn apply(img: &ImageU8, delta: impl Fn(usize, usize) -> f32) -> ImageU8 {
    let (h, w, c) = img.dims();
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let px = i / c;
            (v as f32 + delta(px, i % c)).clamp(0.0, 255.0).round() as u8
        })
        .collect();
    ImageU8::new(h, w, c, data).expect("layout")
}

fn smooth(img: &ImageU8, seed: u64) -> ImageU8 {
    let (h, w, c) = img.dims();
    let fields: Vec<Vec<f32>> = (0..c as u64)
        .map(|ch| {
            let mut f = fbm(h, w, w as f64 / 2.0, 2, 0.5, seed.wrapping_add(ch * 7919)).into_data();
            normalize_sym(&mut f);
            f
        })
        .collect();
    apply(img, |px, ch| 4.0 * fields[ch][px])
}

fn texture(img: &ImageU8, seed: u64) -> ImageU8 {
    let (h, w, _) = img.dims();
    let mut tex = perlin_plane(h, w, 2.0, seed ^ 0x5eed).into_data();
    normalize_sym(&mut tex);
    let edges = edge_strength(img);
    apply(img, |px, _| 6.0 * tex[px] * (0.35 + 0.65 * edges[px]))
}

/// Builds a clean/protected pair from `base` using a proxy protection.
pub fn proxy_pair(base: &ImageU8, style: ProxyProtection, seed: u64) -> Result<PairedSample> {
    let protected = match style {
        ProxyProtection::SmoothField => smooth(base, seed),
        ProxyProtection::FineTexture => texture(base, seed),
        ProxyProtection::Stacked => smooth(&texture(base, seed), seed),
    };
    PairedSample::new(u8_to_f32(base), u8_to_f32(&protected), style.label())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proxies_are_small_deterministic_and_distinct() {
        let base = ImageU8::new(
            32,
            32,
            3,
            (0..32 * 32 * 3).map(|i| ((i * 37) % 200 + 20) as u8).collect(),
        )
        .unwrap();
        let a = proxy_pair(&base, ProxyProtection::SmoothField, 1).unwrap();
        let b = proxy_pair(&base, ProxyProtection::FineTexture, 1).unwrap();
        let s = proxy_pair(&base, ProxyProtection::Stacked, 1).unwrap();
        for pair in [&a, &b, &s] {
            let max = pair
                .clean()
                .data()
                .iter()
                .zip(pair.perturbed().data())
                .map(|(c, p)| (c - p).abs())
                .fold(0.0f32, f32::max);
            assert!(max > 0.0 && max <= 11.0 / 255.0, "{} {max}", pair.label());
        }
        assert_ne!(a.perturbed(), b.perturbed());
        assert_eq!(
            proxy_pair(&base, ProxyProtection::Stacked, 1).unwrap().perturbed(),
            s.perturbed()
        );
    }
}
