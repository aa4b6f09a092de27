//! Independent reference implementations and fixtures for integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use perturbscope::image::{load_png, ImageF32, ImageU8, PairedSample, Plane};
use perturbscope::occlusion::{OcclusionConfig, OverlapMode};
use rand::Rng;

pub fn testdata(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("testdata").join(name)
}

pub fn load_testdata(name: &str) -> ImageU8 {
    load_png(testdata(name)).expect("bundled test image")
}

/// The five bundled 128x128 photographs, by id.
pub const SMALL_IMAGES: [&str; 5] = ["astronaut", "camera", "coffee", "chelsea", "rocket"];

pub fn small_image(id: &str) -> ImageU8 {
    load_testdata(&format!("{id}_128.png")).to_rgb()
}

/// `ln(1 + |F|)` by direct summation of the DFT definition, DC moved to
/// `(⌊H/2⌋, ⌊W/2⌋)`. O(H²W²).
pub fn dft_log_magnitude(h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for u in 0..h {
        for v in 0..w {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for y in 0..h {
                for x in 0..w {
                    let phase = -2.0
                        * std::f64::consts::PI
                        * ((u * y) as f64 / h as f64 + (v * x) as f64 / w as f64);
                    re += g[y * w + x] * phase.cos();
                    im += g[y * w + x] * phase.sin();
                }
            }
            let (su, sv) = ((u + h / 2) % h, (v + w / 2) % w);
            out[su * w + sv] = re.hypot(im).ln_1p();
        }
    }
    out
}

/// Occlusion map by literally blanking each window and re-summing the
/// whole image.
pub fn naive_occlusion(pair: &PairedSample, cfg: &OcclusionConfig) -> Plane {
    let clean = pair.clean();
    let pert = pair.perturbed();
    let (h, w, c) = clean.dims();
    let n = (h * w * c) as f64;
    let mut scores = Vec::new();
    let mut y = 0;
    while y + cfg.window <= h {
        let mut x = 0;
        while x + cfg.window <= w {
            let mut occ = clean.data().to_vec();
            for yy in y..y + cfg.window {
                for xx in x..x + cfg.window {
                    for ch in 0..c {
                        occ[(yy * w + xx) * c + ch] = cfg.baseline_value;
                    }
                }
            }
            let s: f64 = occ
                .iter()
                .zip(pert.data())
                .map(|(&a, &b)| (a as f64 - b as f64).abs())
                .sum();
            scores.push((y, x, s / n));
            x += cfg.stride;
        }
        y += cfg.stride;
    }
    let mut data = vec![0.0f32; h * w];
    let mut acc = vec![0.0f64; h * w];
    let mut hits = vec![0u32; h * w];
    for &(y, x, s) in &scores {
        for yy in y..y + cfg.window {
            for xx in x..x + cfg.window {
                let i = yy * w + xx;
                match cfg.overlap_mode {
                    OverlapMode::Overwrite => data[i] = s as f32,
                    OverlapMode::Average => acc[i] += s,
                }
                hits[i] += 1;
            }
        }
    }
    if cfg.overlap_mode == OverlapMode::Average {
        for i in 0..h * w {
            if hits[i] > 0 {
                data[i] = (acc[i] / hits[i] as f64) as f32;
            }
        }
    }
    Plane::new(h, w, data).unwrap()
}

/// Random image whose samples are 8-bit levels scaled to `[0, 1]`.
pub fn random_u8_image(rng: &mut impl Rng, h: usize, w: usize, c: usize) -> ImageF32 {
    let data = (0..h * w * c).map(|_| rng.random::<u8>() as f32 / 255.0).collect();
    ImageF32::new(h, w, c, data).unwrap()
}

pub fn random_plane(rng: &mut impl Rng, h: usize, w: usize) -> Plane {
    Plane::new(h, w, (0..h * w).map(|_| rng.random::<f32>()).collect()).unwrap()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[cfg(unix)]
pub fn write_script(dir: &Path, name: &str, body: &str) -> PathBuf {
    use std::os::unix::fs::PermissionsExt;
    let p = dir.join(name);
    std::fs::write(&p, format!("#!/bin/sh\n{body}\n")).unwrap();
    std::fs::set_permissions(&p, std::fs::Permissions::from_mode(0o755)).unwrap();
    p
}
