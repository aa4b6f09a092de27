//! Fourier fingerprints: centred log-magnitude spectra, signed spectral
//! differences, and radially averaged profiles.
//!
//! Conventions: unnormalized forward DFT, natural log of `1 + |F|`, DC moved
//! to `(⌊H/2⌋, ⌊W/2⌋)`. Any `H × W` is accepted.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::image::{to_grayscale, ImageF32, PairedSample, Plane};

/// Log-magnitude spectrum with DC at the centre.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub mag: Plane,
}

impl Spectrum {
    pub fn dims(&self) -> (usize, usize) {
        (self.mag.height(), self.mag.width())
    }
}

/// `M_perturbed − M_clean`. Positive where the perturbation adds energy.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDiff {
    pub delta: Plane,
}

/// Ring-averaged values of a centred plane.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    /// `0..=r_max`, contiguous.
    pub radii: Vec<usize>,
    pub magnitudes: Vec<f64>,
    pub ring_sizes: Vec<usize>,
    /// Rings no pixel rounds to. Their magnitude is reported as 0.
    pub empty: Vec<bool>,
}

impl RadialProfile {
    pub fn r_max(&self) -> usize {
        self.radii.len().saturating_sub(1)
    }

    /// CSV with header `radius,magnitude,ring_size,empty_flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("radius,magnitude,ring_size,empty_flag\n");
        for i in 0..self.radii.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.radii[i],
                self.magnitudes[i],
                self.ring_sizes[i],
                u8::from(self.empty[i])
            ));
        }
        out
    }
}

/// Circular shift moving index 0 to `⌊n/2⌋` along both axes.
pub fn fft_shift(plane: &Plane) -> Plane {
    shift_by(plane, plane.height() / 2, plane.width() / 2)
}

/// Inverse of [`fft_shift`]; identical to it for even dimensions.
pub fn ifft_shift(plane: &Plane) -> Plane {
    let (h, w) = (plane.height(), plane.width());
    shift_by(plane, h - h / 2, w - w / 2)
}

fn shift_by(plane: &Plane, dy: usize, dx: usize) -> Plane {
    let (h, w) = (plane.height(), plane.width());
    let mut out = vec![0.0f32; h * w];
    for y in 0..h {
        let ty = (y + dy) % h;
        for x in 0..w {
            out[ty * w + (x + dx) % w] = plane.data()[y * w + x];
        }
    }
    Plane::new(h, w, out).expect("layout")
}

/// Unnormalized forward 2D DFT of a real plane, unshifted.
pub fn fft2(plane: &Plane) -> Vec<Complex<f64>> {
    let (h, w) = (plane.height(), plane.width());
    let mut buf: Vec<Complex<f64>> = plane
        .data()
        .iter()
        .map(|&v| Complex::new(v as f64, 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(w);
    for row in buf.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(h);
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = buf[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            buf[y * w + x] = col[y];
        }
    }
    buf
}

/// `ln(1 + |FFT2(g)|)` with DC centred. `g` must be single-channel.
pub fn fft_log_magnitude(g: &ImageF32) -> Result<Spectrum> {
    if g.channels() != 1 {
        return Err(Error::arg(format!(
            "spectrum needs a grayscale image, got {} channels",
            g.channels()
        )));
    }
    let (h, w) = (g.height(), g.width());
    if h < 2 || w < 2 {
        return Err(Error::arg(format!("spectrum needs at least 2x2, got {h}x{w}")));
    }
    let plane = g.channel_mean();
    let f = fft2(&plane);
    let logmag = Plane::new(h, w, f.iter().map(|c| c.norm().ln_1p() as f32).collect())?;
    Ok(Spectrum {
        mag: fft_shift(&logmag),
    })
}

pub fn spectral_difference(clean: &Spectrum, perturbed: &Spectrum) -> Result<SpectralDiff> {
    clean.mag.same_dims(&perturbed.mag)?;
    let data = perturbed
        .mag
        .data()
        .iter()
        .zip(clean.mag.data())
        .map(|(&p, &c)| p - c)
        .collect();
    Ok(SpectralDiff {
        delta: Plane::new(clean.mag.height(), clean.mag.width(), data)?,
    })
}

/// Rounded distance of each pixel to `(⌊W/2⌋, ⌊H/2⌋)`.
pub fn ring_index(h: usize, w: usize) -> Vec<usize> {
    let (cy, cx) = ((h / 2) as f64, (w / 2) as f64);
    (0..h)
        .flat_map(|y| {
            (0..w).map(move |x| ((x as f64 - cx).hypot(y as f64 - cy)).round() as usize)
        })
        .collect()
}

/// Mean of `plane` over each rounded-radius ring around the centre.
pub fn radial_profile_plane(plane: &Plane) -> RadialProfile {
    let rings = ring_index(plane.height(), plane.width());
    let r_max = rings.iter().copied().max().unwrap_or(0);
    let mut sums = vec![0.0f64; r_max + 1];
    let mut counts = vec![0usize; r_max + 1];
    for (&r, &v) in rings.iter().zip(plane.data()) {
        sums[r] += v as f64;
        counts[r] += 1;
    }
    let magnitudes = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
        .collect();
    RadialProfile {
        radii: (0..=r_max).collect(),
        magnitudes,
        empty: counts.iter().map(|&n| n == 0).collect(),
        ring_sizes: counts,
    }
}

pub fn radial_profile(spec: &Spectrum) -> RadialProfile {
    radial_profile_plane(&spec.mag)
}

/// Every spectral artifact of one clean/perturbed pair.
#[derive(Clone, Debug)]
pub struct PairSpectra {
    pub clean: Spectrum,
    pub perturbed: Spectrum,
    pub delta: SpectralDiff,
    pub radii: Vec<usize>,
    pub clean_profile: RadialProfile,
    pub perturbed_profile: RadialProfile,
}

/// Grayscale, spectra, signed difference and both radial profiles.
pub fn fingerprint_pair(pair: &PairedSample) -> Result<PairSpectra> {
    let clean = fft_log_magnitude(&to_grayscale(pair.clean()))?;
    let perturbed = fft_log_magnitude(&to_grayscale(pair.perturbed()))?;
    let delta = spectral_difference(&clean, &perturbed)?;
    let clean_profile = radial_profile(&clean);
    let perturbed_profile = radial_profile(&perturbed);
    if clean_profile.radii != perturbed_profile.radii {
        return Err(Error::Pipeline("radius vectors differ between clean and perturbed".into()));
    }
    Ok(PairSpectra {
        radii: clean_profile.radii.clone(),
        clean,
        perturbed,
        delta,
        clean_profile,
        perturbed_profile,
    })
}
