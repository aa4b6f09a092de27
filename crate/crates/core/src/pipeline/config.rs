use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::detection::{ExternalReconstructor, ReconstructorKind, DEFAULT_BINS, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::image::{load_png, ImageU8};
use crate::occlusion::OcclusionConfig;
use crate::synthesis::GridSpec;

/// 512x512 RGB photograph used when a grid input names no base image.
static BUNDLED_BASE: &[u8] = include_bytes!("../../testdata/astronaut_512.png");
pub const BUNDLED_BASE_ID: &str = "astronaut";

/// Clean/protected PNG paths for one residual noise source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairPaths {
    pub clean: PathBuf,
    pub protected: PathBuf,
}

/// Optional real pairs behind the residual noise kinds. Missing entries fall
/// back to proxy protections.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualPaths {
    pub glaze: Option<PairPaths>,
    pub shade: Option<PairPaths>,
    pub shade_glaze: Option<PairPaths>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    /// `dir/clean/<id>.png` plus `dir/<label>/<id>.png` per protection label.
    Pairs { dir: PathBuf },
    /// The synthesis grid over `base` (the bundled photograph when absent).
    Grid {
        #[serde(default)]
        base: Option<PathBuf>,
    },
}

impl Default for InputSpec {
    fn default() -> Self {
        InputSpec::Grid { base: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub grid: GridSpec,
    pub residual_sources: ResidualPaths,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    /// Bits. Unset means the default with a warning unless the
    /// reconstructor is external.
    pub threshold: Option<f64>,
    pub bins: usize,
    /// Unset means `oracle` for grid inputs and `paired` for pair inputs.
    pub reconstructor: Option<ReconstructorKind>,
    pub timeout_secs: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            threshold: None,
            bins: DEFAULT_BINS,
            reconstructor: None,
            timeout_secs: ExternalReconstructor::DEFAULT_TIMEOUT.as_secs_f64(),
        }
    }
}

impl DetectionConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn reconstructor_for(&self, input: &InputSpec) -> ReconstructorKind {
        self.reconstructor.clone().unwrap_or(match input {
            InputSpec::Grid { .. } => ReconstructorKind::Oracle,
            InputSpec::Pairs { .. } => ReconstructorKind::Paired,
        })
    }

    /// The threshold to apply, warning when a built-in reconstructor runs
    /// against the default calibrated for an external learned model.
    pub fn effective_threshold(&self, kind: &ReconstructorKind) -> f64 {
        match self.threshold {
            Some(t) => t,
            None => {
                if !kind.is_external() {
                    log::warn!(
                        "no --threshold given for reconstructor {kind}; using {DEFAULT_THRESHOLD} bits, \
                         which is calibrated for learned reconstructors only"
                    );
                }
                DEFAULT_THRESHOLD
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchConfig {
    /// Also write per-pair PMAP planes (several MB per pair at 512x512).
    pub write_maps: bool,
}

/// Everything a run depends on. Serialized verbatim into its manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    pub input: InputSpec,
    pub synthesis: SynthesisConfig,
    pub occlusion: OcclusionConfig,
    pub detection: DetectionConfig,
    pub batch: BatchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            output_dir: PathBuf::from("perturbscope-out"),
            workers: None,
            input: InputSpec::default(),
            synthesis: SynthesisConfig::default(),
            occlusion: OcclusionConfig::default(),
            detection: DetectionConfig::default(),
            batch: BatchConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json {
            context: "run config".into(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// The grid with the run's master seed applied.
    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            master_seed: self.master_seed,
            ..self.synthesis.grid.clone()
        }
    }

    /// Canonical form: grid seed aligned with `master_seed`.
    pub fn canonical(&self) -> Self {
        let mut c = self.clone();
        c.synthesis.grid.master_seed = c.master_seed;
        c
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.canonical()).map_err(|source| Error::Json {
            context: "run config".into(),
            source,
        })
    }

    pub fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.workers.filter(|&n| n > 0) {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| Error::Pipeline(format!("cannot start worker pool: {e}")))
    }
}

/// Loads the grid base image and the id it is reported under.
pub fn load_grid_base(base: Option<&Path>) -> Result<(ImageU8, String)> {
    match base {
        Some(p) => {
            let id = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "base".into());
            Ok((load_png(p)?.to_rgb(), id))
        }
        None => {
            let img = image::load_from_memory_with_format(BUNDLED_BASE, image::ImageFormat::Png)
                .map_err(|source| Error::Image {
                    path: PathBuf::from("<bundled>"),
                    source,
                })?
                .into_rgb8();
            let (w, h) = img.dimensions();
            Ok((ImageU8::new(h as usize, w as usize, 3, img.into_raw())?, BUNDLED_BASE_ID.into()))
        }
    }
}
