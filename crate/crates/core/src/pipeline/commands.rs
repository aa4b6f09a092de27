use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{
    detect, subtract, summarize, summary_csv, BatchSample, DetectionResult, DetectionRow,
    Reconstructor, ReconstructorKind, SummaryRow,
};
use crate::error::{Error, Result};
use crate::fingerprint::{
    build_fingerprint, cluster_quality, embedding_csv, embedding_svg, fingerprint_clean,
    fingerprints_csv, project_2d, Fingerprint, Grouping, PerturbationEvidence,
};
use crate::image::{f32_to_u8, load_png, save_png, u8_to_f32, ImageF32, ImageU8, PairedSample, PerturbationMap};
use crate::occlusion::{aggregate_maps, normalize_map, sensitivity_map, OcclusionConfig, SensitivityMap};
use crate::pmap;
use crate::spectral::{fingerprint_pair, radial_profile_plane};
use crate::synthesis::{derive_seed, grid, proxy_pair, NoiseKind, ProxyProtection, ResidualSources};

use super::config::{load_grid_base, InputSpec, PairPaths, RunConfig};
use super::manifest::{artifact_row, ArtifactRow, ManifestBuilder, RunManifest, MANIFEST_NAME};
use super::viz;

/// Label given to unprotected images in pair directories and fingerprints.
pub const CLEAN_DIR: &str = "clean";

/// One clean/perturbed pair to analyze.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairJob {
    pub pair_id: String,
    pub base_id: String,
    pub label: String,
    pub clean: PathBuf,
    pub perturbed: PathBuf,
    /// Ground-truth perturbation for the oracle reconstructor.
    pub oracle: Option<PathBuf>,
    pub mask: Option<String>,
    pub noise: Option<String>,
    pub lightness: Option<f64>,
}

impl PairJob {
    pub fn new(pair_id: impl Into<String>, clean: PathBuf, perturbed: PathBuf) -> Self {
        let pair_id = pair_id.into();
        Self {
            base_id: pair_id.clone(),
            label: "perturbed".into(),
            pair_id,
            clean,
            perturbed,
            oracle: None,
            mask: None,
            noise: None,
            lightness: None,
        }
    }

    fn batch_sample(&self, grid_labels: bool) -> BatchSample {
        BatchSample {
            sample_id: self.pair_id.clone(),
            mask: self.mask.clone(),
            noise: self.noise.clone(),
            lightness: self.lightness,
            label: (!grid_labels).then(|| self.label.clone()),
            image: self.perturbed.clone(),
            clean: Some(self.clean.clone()),
            oracle: self.oracle.clone(),
        }
    }
}

/// Results of one pair analysis. Artifact rows are relative to the run root.
#[derive(Clone, Debug)]
pub struct PairOutcome {
    pub job: PairJob,
    pub detection: DetectionResult,
    pub fingerprint: Fingerprint,
    pub sensitivity: SensitivityMap,
    pub artifacts: Vec<ArtifactRow>,
}

/// Shared settings for pair analyses within a run.
#[derive(Clone, Debug)]
pub struct AnalysisSettings {
    pub occlusion: OcclusionConfig,
    pub reconstructor: ReconstructorKind,
    pub threshold: f64,
    pub bins: usize,
    pub timeout: Duration,
    /// Also write PMAP planes next to the PNG renderings.
    pub write_maps: bool,
}

impl AnalysisSettings {
    pub fn from_config(cfg: &RunConfig, write_maps: bool) -> Self {
        let reconstructor = cfg.detection.reconstructor_for(&cfg.input);
        Self {
            threshold: cfg.detection.effective_threshold(&reconstructor),
            reconstructor,
            occlusion: cfg.occlusion.clone(),
            bins: cfg.detection.bins,
            timeout: cfg.detection.timeout(),
            write_maps,
        }
    }
}

/// File-system safe form of an identifier.
pub fn safe_id(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with('.') {
        format!("_{s}")
    } else {
        s
    }
}

fn load_rgb(path: &Path) -> Result<ImageF32> {
    Ok(u8_to_f32(&load_png(path)?.to_rgb()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T, context: &str) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        context: context.into(),
        source,
    })?;
    s.push('\n');
    Ok(s)
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Runs occlusion, spectral, detection and fingerprint stages on one pair,
/// writing into `root/rel_dir`.
pub fn analyze_pair(job: &PairJob, settings: &AnalysisSettings, root: &Path, rel_dir: &Path) -> Result<PairOutcome> {
    let clean = load_rgb(&job.clean)?;
    let perturbed = load_rgb(&job.perturbed)?;
    if clean.dims() != perturbed.dims() {
        return Err(Error::arg(format!(
            "pair {} rejected: clean is {}x{}, perturbed is {}x{}",
            job.pair_id,
            clean.height(),
            clean.width(),
            perturbed.height(),
            perturbed.width()
        )));
    }
    let oracle = match (&settings.reconstructor, &job.oracle) {
        (ReconstructorKind::Oracle, Some(p)) => Some(PerturbationMap::from_plane(&pmap::load(p)?)?),
        (ReconstructorKind::Oracle, None) => {
            return Err(Error::Dependency(format!(
                "pair {}: oracle reconstructor needs a ground-truth map",
                job.pair_id
            )))
        }
        _ => None,
    };
    let rec = settings.reconstructor.build(oracle, settings.timeout)?;
    let pair = PairedSample::new(clean, perturbed, job.label.clone())?;

    let sensitivity = sensitivity_map(&pair, &settings.occlusion)?;
    let spectra = fingerprint_pair(&pair)?;
    let delta_profile = radial_profile_plane(&spectra.delta.delta);
    let (detection, residual) = detect(
        pair.perturbed(),
        rec.as_ref(),
        settings.threshold,
        Some(pair.clean()),
        settings.bins,
    )?;
    let fingerprint = build_fingerprint(
        Some(&spectra.perturbed_profile),
        Some(PerturbationEvidence {
            delta_profile: Some(&delta_profile),
            residual: Some(&residual),
            entropy: Some(detection.entropy),
        }),
        job.base_id.clone(),
        job.label.clone(),
    )?;

    let dir = root.join(rel_dir);
    create_dir(&dir)?;
    let mut written: Vec<(&str, PathBuf)> = Vec::new();
    let mut out = |stage: &'static str, name: &str| {
        let p = rel_dir.join(name);
        written.push((stage, p.clone()));
        root.join(p)
    };
    viz::save_heatmap(&normalize_map(&sensitivity).plane, &out("occlusion", "sensitivity.png"))?;
    viz::save_grayscale(&spectra.clean.mag, &out("spectral", "spectrum_clean.png"))?;
    viz::save_grayscale(&spectra.perturbed.mag, &out("spectral", "spectrum_perturbed.png"))?;
    viz::save_diverging(&spectra.delta.delta, &out("spectral", "delta_f.png"))?;
    write_text(&out("spectral", "radial_clean.csv"), &spectra.clean_profile.to_csv())?;
    write_text(&out("spectral", "radial_perturbed.csv"), &spectra.perturbed_profile.to_csv())?;
    write_text(&out("spectral", "radial_delta.csv"), &delta_profile.to_csv())?;
    write_text(
        &out("spectral", "radial.svg"),
        &viz::profile_svg(&[("clean", &spectra.clean_profile), ("perturbed", &spectra.perturbed_profile)]),
    )?;
    write_text(&out("detection", "detection.json"), &to_json(&detection, "detection result")?)?;
    if settings.write_maps {
        pmap::save(&sensitivity.plane, out("occlusion", "sensitivity.pmap"))?;
        pmap::save(&spectra.clean.mag, out("spectral", "spectrum_clean.pmap"))?;
        pmap::save(&spectra.perturbed.mag, out("spectral", "spectrum_perturbed.pmap"))?;
        pmap::save(&spectra.delta.delta, out("spectral", "delta_f.pmap"))?;
        pmap::save(&residual.plane(), out("detection", "residual.pmap"))?;
    }
    let inputs = vec![job.pair_id.clone()];
    let artifacts = written
        .iter()
        .map(|(stage, p)| artifact_row(root, stage, &inputs, p))
        .collect::<Result<_>>()?;
    Ok(PairOutcome {
        job: job.clone(),
        detection,
        fingerprint,
        sensitivity,
        artifacts,
    })
}

/// Pairs under `dir`: `clean/<id>.png` with `<label>/<id>.png` for every
/// other subdirectory. Sorted by label, then id.
pub fn discover_pairs(dir: &Path) -> Result<Vec<PairJob>> {
    let clean_dir = dir.join(CLEAN_DIR);
    if !clean_dir.is_dir() {
        return Err(Error::arg(format!("pairs directory {} has no {CLEAN_DIR}/ folder", dir.display())));
    }
    let pngs = |d: &Path| -> Result<Vec<PathBuf>> {
        let mut v: Vec<PathBuf> = std::fs::read_dir(d)
            .map_err(|e| Error::io(d, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
            .collect();
        v.sort();
        Ok(v)
    };
    let mut labels: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.file_name().is_some_and(|n| n != CLEAN_DIR))
        .collect();
    labels.sort();
    let mut jobs = Vec::new();
    for label_dir in labels {
        let label = label_dir.file_name().unwrap().to_string_lossy().into_owned();
        for p in pngs(&label_dir)? {
            let base_id = p.file_stem().unwrap().to_string_lossy().into_owned();
            let mut job = PairJob::new(
                format!("{label}__{base_id}"),
                clean_dir.join(p.file_name().unwrap()),
                p.clone(),
            );
            job.base_id = base_id;
            job.label = label.clone();
            jobs.push(job);
        }
    }
    Ok(jobs)
}

fn proxy_style(kind: NoiseKind) -> ProxyProtection {
    match kind {
        NoiseKind::ResidualShade => ProxyProtection::SmoothField,
        NoiseKind::ResidualShadeGlaze => ProxyProtection::Stacked,
        _ => ProxyProtection::FineTexture,
    }
}

/// Residual pairs for the grid: configured files where given, proxies
/// derived from `base` otherwise.
pub fn residual_sources(cfg: &RunConfig, base: &ImageU8) -> Result<ResidualSources> {
    let paths = &cfg.synthesis.residual_sources;
    let mut out = ResidualSources::default();
    for &kind in &cfg.synthesis.grid.noises {
        let configured: Option<&PairPaths> = match kind {
            NoiseKind::ResidualGlaze => paths.glaze.as_ref(),
            NoiseKind::ResidualShade => paths.shade.as_ref(),
            NoiseKind::ResidualShadeGlaze => paths.shade_glaze.as_ref(),
            _ => continue,
        };
        let pair = match configured {
            Some(p) => PairedSample::new(load_rgb(&p.clean)?, load_rgb(&p.protected)?, kind.name())?,
            None => {
                let style = proxy_style(kind);
                log::warn!("no source pair configured for {kind}; using proxy protection {}", style.label());
                proxy_pair(base, style, derive_seed(cfg.master_seed, &format!("proxy:{kind}")))?
            }
        };
        match kind {
            NoiseKind::ResidualGlaze => out.glaze = Some(pair),
            NoiseKind::ResidualShade => out.shade = Some(pair),
            _ => out.shade_glaze = Some(pair),
        }
    }
    Ok(out)
}

fn grid_base(cfg: &RunConfig) -> Result<(ImageU8, String)> {
    match &cfg.input {
        InputSpec::Grid { base } => load_grid_base(base.as_deref()),
        InputSpec::Pairs { .. } => Err(Error::arg("synthesis needs a grid input, not a pairs directory")),
    }
}

/// Renders the grid into `root/rel`, recording every file. Returns the jobs
/// that analyze each sample against the base.
fn synth_into(cfg: &RunConfig, root: &Path, rel: &Path, manifest: &mut ManifestBuilder) -> Result<Vec<PairJob>> {
    let (base, base_id) = grid_base(cfg)?;
    let sources = residual_sources(cfg, &base)?;
    let dir = root.join(rel);
    create_dir(&dir)?;
    let out = grid(&base, &cfg.grid_spec(), &sources, &dir)?;
    let base_rel = rel.join("base.png");
    save_png(&base, root.join(&base_rel))?;
    manifest.record("synth", std::slice::from_ref(&base_id), &base_rel)?;
    manifest.record("synth", &[], &rel.join("grid_manifest.json"))?;
    let rows: Vec<ArtifactRow> = out
        .rows
        .par_iter()
        .flat_map_iter(|r| {
            let id = vec![r.sample_id()];
            [
                artifact_row(root, "synth", &id, &rel.join(&r.image_path)),
                artifact_row(root, "synth", &id, &rel.join(&r.delta_path)),
            ]
        })
        .collect::<Result<_>>()?;
    manifest.extend(rows);
    Ok(out
        .rows
        .iter()
        .map(|r| PairJob {
            pair_id: r.sample_id(),
            base_id: base_id.clone(),
            label: r.noise.to_string(),
            clean: root.join(&base_rel),
            perturbed: dir.join(&r.image_path),
            oracle: Some(dir.join(&r.delta_path)),
            mask: Some(r.mask.to_string()),
            noise: Some(r.noise.to_string()),
            lightness: Some(r.lightness),
        })
        .collect())
}

/// `synth`: renders the grid into the output directory with a manifest.
pub fn cmd_synth(cfg: &RunConfig) -> Result<RunManifest> {
    let root = cfg.output_dir.clone();
    create_dir(&root)?;
    let mut manifest = ManifestBuilder::new(&root);
    cfg.thread_pool()?
        .install(|| synth_into(cfg, &root, Path::new(""), &mut manifest))?;
    let manifest = manifest.finish("synth", cfg)?;
    manifest.write(&root)?;
    Ok(manifest)
}

/// `analyze-pair`: every stage for one pair under `output_dir/<pair_id>/`.
///
/// Without a configured reconstructor the oracle is used when the job has a
/// ground-truth map, the paired difference otherwise.
///
/// Rows from an existing manifest in the output directory are kept unless
/// they belong to the same pair or no longer match their files.
pub fn cmd_analyze_pair(job: &PairJob, cfg: &RunConfig) -> Result<(PairOutcome, RunManifest)> {
    let root = cfg.output_dir.clone();
    let mut settings = AnalysisSettings::from_config(cfg, true);
    if cfg.detection.reconstructor.is_none() {
        settings.reconstructor = if job.oracle.is_some() {
            ReconstructorKind::Oracle
        } else {
            ReconstructorKind::Paired
        };
        settings.threshold = cfg.detection.effective_threshold(&settings.reconstructor);
    }
    let rel = PathBuf::from(safe_id(&job.pair_id));
    // inputs are read before anything is created so a bad pair leaves no trace
    for p in [&job.clean, &job.perturbed] {
        if !p.is_file() {
            return Err(Error::io(p, std::io::Error::from(std::io::ErrorKind::NotFound)));
        }
    }
    let outcome = cfg.thread_pool()?.install(|| analyze_pair(job, &settings, &root, &rel))?;
    let mut manifest = ManifestBuilder::new(&root);
    if let Ok(previous) = RunManifest::read(&root) {
        let prefix = format!("{}/", rel.display());
        let stale = previous.dangling(&root);
        manifest.extend(
            previous
                .artifacts
                .into_iter()
                .filter(|a| !a.path.starts_with(&prefix) && !stale.contains(&a.path)),
        );
    }
    manifest.extend(outcome.artifacts.clone());
    let manifest = manifest.finish("analyze-pair", cfg)?;
    manifest.write(&root)?;
    Ok((outcome, manifest))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub samples: usize,
    pub silhouette_by_base: Option<f64>,
    pub silhouette_by_label: Option<f64>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct BatchRun {
    pub manifest: RunManifest,
    pub summary: Vec<SummaryRow>,
    pub detections: Vec<DetectionRow>,
    pub fingerprints: Vec<Fingerprint>,
    pub cluster: ClusterReport,
    /// `(pair_id, error)` for every pair that did not complete.
    pub failures: Vec<(String, String)>,
}

fn detections_csv(rows: &[DetectionRow]) -> String {
    let mut out = String::from("sample_id,mask,noise,lightness,label,entropy_bits,detected,error\n");
    for r in rows {
        let s = &r.sample;
        let (e, d) = match &r.result {
            Some(res) => (format!("{:.6}", res.entropy), res.detected.to_string()),
            None => (String::new(), String::new()),
        };
        let err = r.error.as_deref().unwrap_or("").replace(['\n', ','], " ");
        out.push_str(&format!(
            "{},{},{},{},{},{e},{d},{err}\n",
            s.sample_id,
            s.mask.as_deref().unwrap_or(""),
            s.noise.as_deref().unwrap_or(""),
            s.lightness.map(|l| format!("{l:.2}")).unwrap_or_default(),
            s.label.as_deref().unwrap_or(""),
        ));
    }
    out
}

/// `batch`: analyzes every pair of the configured input, then writes the
/// detection summary, fingerprint embedding, cluster scores and per-label
/// aggregate sensitivity maps.
///
/// Failed pairs are reported in [`BatchRun::failures`]; the run still
/// completes and its manifest is written.
pub fn cmd_batch(cfg: &RunConfig) -> Result<BatchRun> {
    let root = cfg.output_dir.clone();
    let pool = cfg.thread_pool()?;
    let mut manifest = ManifestBuilder::new(&root);
    let is_grid = matches!(cfg.input, InputSpec::Grid { .. });
    let jobs = match &cfg.input {
        InputSpec::Grid { .. } => {
            create_dir(&root)?;
            pool.install(|| synth_into(cfg, &root, Path::new("grid"), &mut manifest))?
        }
        InputSpec::Pairs { dir } => discover_pairs(dir)?,
    };
    if jobs.is_empty() {
        return Err(Error::arg("no samples"));
    }
    create_dir(&root)?;
    let settings = AnalysisSettings::from_config(cfg, cfg.batch.write_maps);

    let results: Vec<Result<PairOutcome>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let rel = Path::new("pairs").join(safe_id(&job.pair_id));
                analyze_pair(job, &settings, &root, &rel)
            })
            .collect()
    });
    let mut bases: BTreeMap<String, PathBuf> = BTreeMap::new();
    // a missing clean file is already reported once per pair
    for job in jobs.iter().filter(|j| j.clean.is_file()) {
        bases.entry(job.base_id.clone()).or_insert_with(|| job.clean.clone());
    }
    let clean_fps: Vec<Result<Fingerprint>> = pool.install(|| {
        bases
            .par_iter()
            .map(|(id, path)| fingerprint_clean(&load_rgb(path)?, id.clone()))
            .collect()
    });

    let mut failures = Vec::new();
    let mut detections = Vec::new();
    let mut outcomes = Vec::new();
    for (job, res) in jobs.iter().zip(results) {
        match res {
            Ok(o) => {
                detections.push(DetectionRow {
                    sample: job.batch_sample(is_grid),
                    result: Some(o.detection.clone()),
                    error: None,
                });
                manifest.extend(o.artifacts.iter().cloned());
                outcomes.push(o);
            }
            Err(e) => {
                log::error!("pair {} failed: {e}", job.pair_id);
                detections.push(DetectionRow {
                    sample: job.batch_sample(is_grid),
                    result: None,
                    error: Some(e.to_string()),
                });
                failures.push((job.pair_id.clone(), e.to_string()));
            }
        }
    }
    let mut fingerprints = Vec::new();
    for (id, fp) in bases.keys().zip(clean_fps) {
        match fp {
            Ok(f) => fingerprints.push(f),
            Err(e) => {
                log::error!("clean image {id} failed: {e}");
                failures.push((format!("clean__{id}"), e.to_string()));
            }
        }
    }
    fingerprints.extend(outcomes.iter().map(|o| o.fingerprint.clone()));

    let summary = summarize(&detections);
    let mut emit = |stage: &str, name: &str, text: &str| -> Result<()> {
        write_text(&root.join(name), text)?;
        manifest.record(stage, &[], Path::new(name))
    };
    emit("detection", "detection_summary.csv", &summary_csv(&summary))?;
    emit("detection", "detections.csv", &detections_csv(&detections))?;
    emit("fingerprint", "fingerprints.csv", &fingerprints_csv(&fingerprints))?;

    let mut notes = Vec::new();
    if fingerprints.len() >= 3 {
        let emb = project_2d(&fingerprints)?;
        if emb.degenerate {
            notes.push("embedding is degenerate (rank < 2)".to_string());
        }
        emit("fingerprint", "embedding.csv", &embedding_csv(&fingerprints, &emb))?;
        emit("fingerprint", "embedding.svg", &embedding_svg(&fingerprints, &emb))?;
    } else {
        notes.push(format!("{} fingerprints; embedding needs at least 3", fingerprints.len()));
    }
    let mut score = |g: Grouping, name: &str| match cluster_quality(&fingerprints, g) {
        Ok(s) => Some(s),
        Err(e) => {
            notes.push(format!("by {name}: {e}"));
            None
        }
    };
    let cluster = ClusterReport {
        samples: fingerprints.len(),
        silhouette_by_base: score(Grouping::BaseImage, "base image"),
        silhouette_by_label: score(Grouping::ProtectionLabel, "protection label"),
        notes,
    };
    emit("fingerprint", "cluster_quality.json", &to_json(&cluster, "cluster report")?)?;

    let mut by_label: BTreeMap<&str, Vec<SensitivityMap>> = BTreeMap::new();
    for o in &outcomes {
        by_label.entry(o.job.label.as_str()).or_default().push(normalize_map(&o.sensitivity));
    }
    for (label, maps) in by_label {
        match aggregate_maps(&maps) {
            Ok(agg) => {
                let stem = format!("aggregate/{}", safe_id(label));
                create_dir(&root.join("aggregate"))?;
                pmap::save(&agg.plane, root.join(format!("{stem}.pmap")))?;
                viz::save_heatmap(&agg.plane, &root.join(format!("{stem}.png")))?;
                manifest.record("occlusion", &[label.to_string()], Path::new(&format!("{stem}.pmap")))?;
                manifest.record("occlusion", &[label.to_string()], Path::new(&format!("{stem}.png")))?;
            }
            Err(e) => log::warn!("no aggregate sensitivity map for {label}: {e}"),
        }
    }

    let manifest = manifest.finish("batch", cfg)?;
    manifest.write(&root)?;
    Ok(BatchRun {
        manifest,
        summary,
        detections,
        fingerprints,
        cluster,
        failures,
    })
}

/// Inputs for the single-image `detect` and `purify` commands.
#[derive(Clone, Debug, Default)]
pub struct ImageRequest {
    pub image: PathBuf,
    pub clean: Option<PathBuf>,
    pub oracle: Option<PathBuf>,
}

fn reconstructor_for_request(
    req: &ImageRequest,
    cfg: &RunConfig,
) -> Result<(ImageF32, Option<ImageF32>, ReconstructorKind, Box<dyn Reconstructor>)> {
    let image = load_rgb(&req.image)?;
    let clean = req.clean.as_deref().map(load_rgb).transpose()?;
    let kind = cfg.detection.reconstructor.clone().unwrap_or(if req.oracle.is_some() {
        ReconstructorKind::Oracle
    } else if req.clean.is_some() {
        ReconstructorKind::Paired
    } else {
        ReconstructorKind::HighPass
    });
    let oracle = req
        .oracle
        .as_deref()
        .map(|p| pmap::load(p).and_then(|plane| PerturbationMap::from_plane(&plane)))
        .transpose()?;
    let rec = kind.build(oracle, cfg.detection.timeout())?;
    Ok((image, clean, kind, rec))
}

/// `detect`: entropy detection on one image; optionally saves `δ̂`.
pub fn cmd_detect(req: &ImageRequest, cfg: &RunConfig, residual_out: Option<&Path>) -> Result<DetectionResult> {
    let (image, clean, kind, rec) = reconstructor_for_request(req, cfg)?;
    let threshold = cfg.detection.effective_threshold(&kind);
    let (result, residual) = detect(&image, rec.as_ref(), threshold, clean.as_ref(), cfg.detection.bins)?;
    if let Some(p) = residual_out {
        pmap::save(&residual.plane(), p)?;
    }
    Ok(result)
}

/// `purify`: writes `clip(x − δ̂, 0, 1)` as an 8-bit PNG.
pub fn cmd_purify(req: &ImageRequest, cfg: &RunConfig, out: &Path) -> Result<ImageF32> {
    let (image, clean, _, rec) = reconstructor_for_request(req, cfg)?;
    let residual = rec.reconstruct(&image, clean.as_ref())?;
    let purified = subtract(&image, &residual)?;
    save_png(&f32_to_u8(&purified), out)?;
    Ok(purified)
}

/// Location of the manifest a run directory is expected to hold.
pub fn manifest_path(run_dir: &Path) -> PathBuf {
    run_dir.join(MANIFEST_NAME)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn safe_ids() {
        assert_eq!(safe_id("uniform__gauss__L0.10"), "uniform__gauss__L0.10");
        assert_eq!(safe_id("a/b c"), "a_b_c");
        assert_eq!(safe_id(".."), "_..");
    }

    #[test]
    fn pair_discovery_layout() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageU8::filled(4, 4, 3, 9).unwrap();
        for sub in ["clean", "glaze", "shade"] {
            create_dir(&dir.path().join(sub)).unwrap();
        }
        save_png(&img, dir.path().join("clean/b.png")).unwrap();
        save_png(&img, dir.path().join("clean/a.png")).unwrap();
        save_png(&img, dir.path().join("shade/a.png")).unwrap();
        save_png(&img, dir.path().join("glaze/b.png")).unwrap();
        save_png(&img, dir.path().join("glaze/a.png")).unwrap();
        let jobs = discover_pairs(dir.path()).unwrap();
        let ids: Vec<&str> = jobs.iter().map(|j| j.pair_id.as_str()).collect();
        assert_eq!(ids, ["glaze__a", "glaze__b", "shade__a"]);
        assert_eq!(jobs[1].base_id, "b");
        assert_eq!(jobs[2].label, "shade");
        assert!(jobs[2].clean.ends_with("clean/a.png"));
        assert!(discover_pairs(&dir.path().join("glaze")).is_err());
    }
}
