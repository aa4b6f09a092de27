//! Raster types shared by every stage, PNG I/O, and the handful of
//! pixel-level primitives (grayscale, range conversion, clipping).
//!
//! Two sample domains coexist: 8-bit `[0, 255]` for files and noise/mask
//! composition, unit-interval floats for all analysis.

use std::path::Path;

use image::{ColorType, DynamicImage, GenericImageView};

use crate::error::{Error, Result};

fn check_layout(height: usize, width: usize, channels: usize, len: usize) -> Result<()> {
    if channels != 1 && channels != 3 {
        return Err(Error::arg(format!("channels must be 1 or 3, got {channels}")));
    }
    let expected = height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::arg("image dimensions overflow"))?;
    if expected != len {
        return Err(Error::arg(format!(
            "data length {len} does not match {height}x{width}x{channels}"
        )));
    }
    Ok(())
}

/// 8-bit raster, row-major, interleaved channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageU8 {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<u8>,
}

impl ImageU8 {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        check_layout(height, width, channels, data.len())?;
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    /// Replicates a single channel to RGB; RGB images are returned unchanged.
    pub fn to_rgb(&self) -> ImageU8 {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        ImageU8 {
            height: self.height,
            width: self.width,
            channels: 3,
            data,
        }
    }
}

/// Float raster, row-major, interleaved channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageF32 {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageF32 {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        check_layout(height, width, channels, data.len())?;
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn same_dims(&self, other: &ImageF32) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                left: format_dims(self.dims()),
                right: format_dims(other.dims()),
            });
        }
        Ok(())
    }

    /// Collapses channels by their arithmetic mean into a [`Plane`].
    pub fn channel_mean(&self) -> Plane {
        let data = if self.channels == 1 {
            self.data.clone()
        } else {
            self.data
                .chunks_exact(self.channels)
                .map(|px| px.iter().sum::<f32>() / self.channels as f32)
                .collect()
        };
        Plane {
            height: self.height,
            width: self.width,
            data,
        }
    }
}

pub(crate) fn format_dims((h, w, c): (usize, usize, usize)) -> String {
    format!("{h}x{w}x{c}")
}

/// A single-channel float plane: perturbation maps, spectra, sensitivity
/// maps. This is the payload of the PMAP format.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        check_layout(height, width, 1, data.len())?;
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn same_dims(&self, other: &Plane) -> Result<()> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(Error::DimensionMismatch {
                left: format!("{}x{}", self.height, self.width),
                right: format!("{}x{}", other.height, other.width),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Plane {
        Plane {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn to_image(&self) -> ImageF32 {
        ImageF32 {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.data.clone(),
        }
    }
}

/// A signed perturbation field (true `δ` or a reconstruction `δ̂`).
///
/// Samples are `f64` so that differences of two `f32` images are held
/// exactly and `clean + δ == perturbed` survives the round trip. Channel
/// count follows whatever produced it; [`PerturbationMap::plane`] gives the
/// single-channel view used for entropy and PMAP export.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl PerturbationMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_layout(height, width, channels, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!("perturbation sample {i} is not finite")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            channels: 1,
            data: vec![0.0; height * width],
        }
    }

    /// Widens a PMAP plane. Fails on non-finite samples.
    pub fn from_plane(plane: &Plane) -> Result<Self> {
        Self::new(
            plane.height(),
            plane.width(),
            1,
            plane.data().iter().map(|&v| v as f64).collect(),
        )
    }

    /// `perturbed − clean`, channel by channel.
    pub fn difference(perturbed: &ImageF32, clean: &ImageF32) -> Result<Self> {
        perturbed.same_dims(clean)?;
        let data = perturbed
            .data()
            .iter()
            .zip(clean.data())
            .map(|(&p, &c)| p as f64 - c as f64)
            .collect();
        Self::new(perturbed.height, perturbed.width, perturbed.channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Channel-mean samples, one per pixel.
    pub fn reduced(&self) -> Vec<f64> {
        if self.channels == 1 {
            return self.data.clone();
        }
        self.data
            .chunks_exact(self.channels)
            .map(|px| px.iter().sum::<f64>() / self.channels as f64)
            .collect()
    }

    pub fn plane(&self) -> Plane {
        Plane {
            height: self.height,
            width: self.width,
            data: self.reduced().into_iter().map(|v| v as f32).collect(),
        }
    }
}

/// A clean image and its protected counterpart.
#[derive(Clone, Debug)]
pub struct PairedSample {
    clean: ImageF32,
    perturbed: ImageF32,
    label: String,
}

impl PairedSample {
    pub fn new(clean: ImageF32, perturbed: ImageF32, label: impl Into<String>) -> Result<Self> {
        clean.same_dims(&perturbed)?;
        Ok(Self {
            clean,
            perturbed,
            label: label.into(),
        })
    }

    pub fn clean(&self) -> &ImageF32 {
        &self.clean
    }

    pub fn perturbed(&self) -> &ImageF32 {
        &self.perturbed
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Unweighted channel mean. Single-channel input passes through.
pub fn to_grayscale(img: &ImageF32) -> ImageF32 {
    img.channel_mean().to_image()
}

pub fn u8_to_f32(img: &ImageU8) -> ImageF32 {
    ImageF32 {
        height: img.height,
        width: img.width,
        channels: img.channels,
        data: img.data.iter().map(|&v| v as f32 / 255.0).collect(),
    }
}

/// `round(clamp(v, 0, 1) * 255)`, half away from zero.
pub fn sample_to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn f32_to_u8(img: &ImageF32) -> ImageU8 {
    ImageU8 {
        height: img.height,
        width: img.width,
        channels: img.channels,
        data: img.data.iter().map(|&v| sample_to_u8(v)).collect(),
    }
}

/// Clamps every sample into `[lo, hi]`. Samples already inside are untouched.
pub fn clip(img: &ImageF32, lo: f32, hi: f32) -> Result<ImageF32> {
    if !(lo < hi) {
        return Err(Error::arg(format!("clip bounds must satisfy lo < hi, got [{lo}, {hi}]")));
    }
    Ok(ImageF32 {
        height: img.height,
        width: img.width,
        channels: img.channels,
        data: img.data.iter().map(|&v| v.clamp(lo, hi)).collect(),
    })
}

/// Loads a PNG (or anything the decoder recognises) as 8-bit.
///
/// 8-bit grayscale stays single-channel; everything else becomes RGB.
/// Alpha is composited over white and dropped.
pub fn load_png(path: impl AsRef<Path>) -> Result<ImageU8> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(from_dynamic(img))
}

fn from_dynamic(img: DynamicImage) -> ImageU8 {
    let (w, h) = img.dimensions();
    let (h, w) = (h as usize, w as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => ImageU8 {
            height: h,
            width: w,
            channels: 1,
            data: buf.into_raw(),
        },
        DynamicImage::ImageLumaA8(buf) => {
            let data = buf
                .into_raw()
                .chunks_exact(2)
                .map(|px| over_white(px[0] as f32 / 255.0, px[1] as f32 / 255.0))
                .collect();
            ImageU8 {
                height: h,
                width: w,
                channels: 1,
                data,
            }
        }
        other if other.color().has_alpha() => {
            let rgba = other.to_rgba32f().into_raw();
            let data = rgba
                .chunks_exact(4)
                .flat_map(|px| {
                    let a = px[3];
                    [over_white(px[0], a), over_white(px[1], a), over_white(px[2], a)]
                })
                .collect();
            ImageU8 {
                height: h,
                width: w,
                channels: 3,
                data,
            }
        }
        other => ImageU8 {
            height: h,
            width: w,
            channels: 3,
            data: other.to_rgb8().into_raw(),
        },
    }
}

fn over_white(v: f32, alpha: f32) -> u8 {
    sample_to_u8(v * alpha + (1.0 - alpha))
}

pub fn save_png(img: &ImageU8, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let color = if img.channels == 1 {
        ColorType::L8
    } else {
        ColorType::Rgb8
    };
    image::save_buffer_with_format(
        path,
        &img.data,
        img.width as u32,
        img.height as u32,
        color,
        image::ImageFormat::Png,
    )
    .map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}
