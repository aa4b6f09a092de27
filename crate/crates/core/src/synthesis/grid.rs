use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{save_png, u8_to_f32, ImageU8, PairedSample, PerturbationMap};
use crate::pmap;

use super::{
    compose, derive_seed, make_mask, make_noise, mask_at_lightness, Mask, MaskKind, NoiseKind,
    SynthParams, SynthSpec, LIGHTNESS_LEVELS, MASTER_OPACITY,
};

/// Which masks, noises and lightness levels to cross.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub masks: Vec<MaskKind>,
    pub noises: Vec<NoiseKind>,
    pub lightness: Vec<f64>,
    pub master_opacity: f64,
    pub master_seed: u64,
    pub params: SynthParams,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            masks: MaskKind::ALL.to_vec(),
            noises: NoiseKind::ALL.to_vec(),
            lightness: LIGHTNESS_LEVELS.to_vec(),
            master_opacity: MASTER_OPACITY,
            master_seed: 0,
            params: SynthParams::default(),
        }
    }
}

impl GridSpec {
    /// All combinations in mask-major, then noise, then lightness order.
    pub fn combinations(&self) -> Vec<SynthSpec> {
        let mut out = Vec::with_capacity(self.masks.len() * self.noises.len() * self.lightness.len());
        for &mask in &self.masks {
            for &noise in &self.noises {
                for &l in &self.lightness {
                    let seed = derive_seed(self.master_seed, &format!("{mask}:{noise}:{l:.4}"));
                    out.push(SynthSpec {
                        mask_kind: mask,
                        noise_kind: noise,
                        lightness: l,
                        master_opacity: self.master_opacity,
                        seed,
                    });
                }
            }
        }
        out
    }

    pub fn mask_seed(&self, kind: MaskKind) -> u64 {
        derive_seed(self.master_seed, &format!("mask:{kind}"))
    }
}

/// Clean/protected pairs that feed the residual noise kinds.
#[derive(Clone, Debug, Default)]
pub struct ResidualSources {
    pub glaze: Option<PairedSample>,
    pub shade: Option<PairedSample>,
    pub shade_glaze: Option<PairedSample>,
}

impl ResidualSources {
    pub fn get(&self, kind: NoiseKind) -> Option<&PairedSample> {
        match kind {
            NoiseKind::ResidualGlaze => self.glaze.as_ref(),
            NoiseKind::ResidualShade => self.shade.as_ref(),
            NoiseKind::ResidualShadeGlaze => self.shade_glaze.as_ref(),
            _ => None,
        }
    }
}

/// One manifest row; paths are relative to the grid's output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub mask: MaskKind,
    pub noise: NoiseKind,
    pub lightness: f64,
    pub seed: u64,
    pub image_path: PathBuf,
    pub delta_path: PathBuf,
}

impl GridRow {
    pub fn sample_id(&self) -> String {
        sample_name(self.mask, self.noise, self.lightness)
    }
}

#[derive(Clone, Debug)]
pub struct GridOutput {
    pub rows: Vec<GridRow>,
    pub manifest_path: PathBuf,
}

fn sample_name(mask: MaskKind, noise: NoiseKind, l: f64) -> String {
    format!("{mask}__{noise}__L{l:.2}")
}

/// Renders one combination in memory: the composed image and its exact
/// ground-truth perturbation `(composed − base) / 255`.
pub fn render(
    base: &ImageU8,
    spec: &SynthSpec,
    mask: &Mask,
    source: Option<&PairedSample>,
    params: &SynthParams,
) -> Result<(ImageU8, PerturbationMap)> {
    spec.validate()?;
    let (h, w, _) = base.dims();
    let noise = make_noise(spec.noise_kind, h, w, spec.seed, source, params)?;
    let composed = compose(base, &noise, mask, spec.master_opacity)?;
    let delta = PerturbationMap::difference(&u8_to_f32(&composed), &u8_to_f32(base))?;
    Ok((composed, delta))
}

/// Runs the full mask × noise × lightness product over `base`, writing
/// `images/*.png`, `deltas/*.pmap` and `grid_manifest.json` under `out_dir`.
///
/// Work fans out over the current rayon pool; output bytes do not depend on
/// scheduling. The first failing combination aborts the grid.
pub fn grid(
    base: &ImageU8,
    spec: &GridSpec,
    sources: &ResidualSources,
    out_dir: &Path,
) -> Result<GridOutput> {
    let (h, w, _) = base.dims();
    for &noise in &spec.noises {
        if noise.is_residual() && sources.get(noise).is_none() {
            return Err(Error::arg(format!("grid needs a residual source for noise kind {noise}")));
        }
    }
    for dir in ["images", "deltas"] {
        let d = out_dir.join(dir);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }

    let raw: BTreeMap<MaskKind, Mask> = spec
        .masks
        .par_iter()
        .map(|&kind| Ok((kind, make_mask(kind, h, w, spec.mask_seed(kind), &spec.params)?)))
        .collect::<Result<_>>()?;
    let keyed: Vec<(MaskKind, usize)> = spec
        .masks
        .iter()
        .flat_map(|&m| (0..spec.lightness.len()).map(move |i| (m, i)))
        .collect();
    let adjusted: BTreeMap<(MaskKind, usize), Mask> = keyed
        .par_iter()
        .map(|&(kind, i)| {
            let l = spec.lightness[i];
            mask_at_lightness(&raw[&kind], l)
                .map(|m| ((kind, i), m))
                .map_err(|e| Error::Pipeline(format!("grid combination mask={kind} L={l}: {e}")))
        })
        .collect::<Result<_>>()?;

    let combos = spec.combinations();
    let rows = combos
        .par_iter()
        .enumerate()
        .map(|(idx, combo)| {
            let li = idx % spec.lightness.len();
            let fail = |e: Error| {
                Error::Pipeline(format!(
                    "grid combination mask={} noise={} L={}: {e}",
                    combo.mask_kind, combo.noise_kind, combo.lightness
                ))
            };
            let mask = &adjusted[&(combo.mask_kind, li)];
            let (img, delta) = render(base, combo, mask, sources.get(combo.noise_kind), &spec.params)
                .map_err(fail)?;
            let name = sample_name(combo.mask_kind, combo.noise_kind, combo.lightness);
            let image_path = PathBuf::from("images").join(format!("{name}.png"));
            let delta_path = PathBuf::from("deltas").join(format!("{name}.pmap"));
            save_png(&img, out_dir.join(&image_path)).map_err(fail)?;
            pmap::save(&delta.plane(), out_dir.join(&delta_path)).map_err(fail)?;
            Ok(GridRow {
                mask: combo.mask_kind,
                noise: combo.noise_kind,
                lightness: combo.lightness,
                seed: combo.seed,
                image_path,
                delta_path,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest_path = out_dir.join("grid_manifest.json");
    write_grid_manifest(&rows, &manifest_path)?;
    Ok(GridOutput {
        rows,
        manifest_path,
    })
}

pub fn write_grid_manifest(rows: &[GridRow], path: &Path) -> Result<()> {
    let mut json = serde_json::to_string_pretty(rows).map_err(|source| Error::Json {
        context: "grid manifest".into(),
        source,
    })?;
    json.push('\n');
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn read_grid_manifest(path: &Path) -> Result<Vec<GridRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })
}
