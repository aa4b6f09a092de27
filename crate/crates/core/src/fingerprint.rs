//! Hand-crafted image descriptors and the geometry around them.
//!
//! A [`Fingerprint`] concatenates, in this order:
//!
//! | block | length |
//! |---|---|
//! | radial profile of the image's log-magnitude spectrum | 64 |
//! | radial profile of the signed spectral difference (zeros when clean) | 64 |
//! | entropy of the reconstructed residual | 1 |
//! | residual mean, standard deviation, mean gradient magnitude | 3 |
//!
//! Profiles are linearly resampled over normalized radius, so the length is
//! the same for every image size. Sets of fingerprints are compared on
//! per-dimension z-scores: [`distance_matrix`], [`project_2d`] (PCA) and
//! [`cluster_quality`] (mean silhouette).

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::detection::{detect, Reconstructor};
use crate::error::{Error, Result};
use crate::image::{to_grayscale, ImageF32, PairedSample, PerturbationMap};
use crate::spectral::{fft_log_magnitude, fingerprint_pair, radial_profile, radial_profile_plane, RadialProfile};

pub const PROFILE_BINS: usize = 64;
pub const DIMS: usize = 2 * PROFILE_BINS + 4;
pub const CLEAN_LABEL: &str = "clean";

/// Ranks below this fraction of the leading eigenvalue count as zero.
const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub vector: Vec<f64>,
    pub base_image_id: String,
    pub protection_label: String,
}

/// Artifacts of a perturbed sample that feed the second half of the descriptor.
#[derive(Clone, Copy, Debug, Default)]
pub struct PerturbationEvidence<'a> {
    pub delta_profile: Option<&'a RadialProfile>,
    pub residual: Option<&'a PerturbationMap>,
    pub entropy: Option<f64>,
}

/// Linear resampling of the non-empty rings onto `bins` points spanning
/// radius 0 to the outermost ring.
pub fn resample_profile(profile: &RadialProfile, bins: usize) -> Vec<f64> {
    let pts: Vec<(f64, f64)> = profile
        .radii
        .iter()
        .zip(&profile.magnitudes)
        .zip(&profile.empty)
        .filter(|(_, &e)| !e)
        .map(|((&r, &m), _)| (r as f64, m))
        .collect();
    match pts.len() {
        0 => return vec![0.0; bins],
        1 => return vec![pts[0].1; bins],
        _ => {}
    }
    let r_end = pts[pts.len() - 1].0;
    let mut j = 0;
    (0..bins)
        .map(|k| {
            let r = if bins == 1 { 0.0 } else { r_end * k as f64 / (bins - 1) as f64 };
            while j + 2 < pts.len() && pts[j + 1].0 < r {
                j += 1;
            }
            let (r0, m0) = pts[j];
            let (r1, m1) = pts[j + 1];
            let t = ((r - r0) / (r1 - r0)).clamp(0.0, 1.0);
            m0 + t * (m1 - m0)
        })
        .collect()
}

/// Mean, standard deviation and mean forward-difference gradient magnitude
/// of the channel-mean residual.
pub fn residual_stats(residual: &PerturbationMap) -> [f64; 3] {
    let v = residual.reduced();
    let (h, w) = (residual.height(), residual.width());
    if v.is_empty() {
        return [0.0; 3];
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let mut grad = 0.0;
    let mut count = 0usize;
    for y in 0..h.saturating_sub(1) {
        for x in 0..w.saturating_sub(1) {
            let c = v[y * w + x];
            grad += (v[y * w + x + 1] - c).hypot(v[(y + 1) * w + x] - c);
            count += 1;
        }
    }
    let grad = if count > 0 { grad / count as f64 } else { 0.0 };
    [mean, std, grad]
}

/// Assembles a descriptor from already computed artifacts. `perturbation`
/// is `None` for clean images, whose second half is all zeros.
pub fn build_fingerprint(
    spectrum_profile: Option<&RadialProfile>,
    perturbation: Option<PerturbationEvidence<'_>>,
    base_image_id: impl Into<String>,
    protection_label: impl Into<String>,
) -> Result<Fingerprint> {
    let spectrum = spectrum_profile
        .ok_or_else(|| Error::Dependency("fingerprint needs the spectral stage (image profile)".into()))?;
    let mut vector = resample_profile(spectrum, PROFILE_BINS);
    match perturbation {
        None => vector.extend([0.0; PROFILE_BINS + 4]),
        Some(ev) => {
            let delta = ev.delta_profile.ok_or_else(|| {
                Error::Dependency("fingerprint needs the spectral stage (difference profile)".into())
            })?;
            let residual = ev
                .residual
                .ok_or_else(|| Error::Dependency("fingerprint needs the reconstruction stage".into()))?;
            let entropy = ev
                .entropy
                .ok_or_else(|| Error::Dependency("fingerprint needs the detection stage".into()))?;
            vector.extend(resample_profile(delta, PROFILE_BINS));
            vector.push(entropy);
            vector.extend(residual_stats(residual));
        }
    }
    debug_assert_eq!(vector.len(), DIMS);
    if let Some(i) = vector.iter().position(|v| !v.is_finite()) {
        return Err(Error::Pipeline(format!("fingerprint entry {i} is not finite")));
    }
    Ok(Fingerprint {
        vector,
        base_image_id: base_image_id.into(),
        protection_label: protection_label.into(),
    })
}

/// Descriptor of an unperturbed image.
pub fn fingerprint_clean(image: &ImageF32, base_image_id: impl Into<String>) -> Result<Fingerprint> {
    let profile = radial_profile(&fft_log_magnitude(&to_grayscale(image))?);
    build_fingerprint(Some(&profile), None, base_image_id, CLEAN_LABEL)
}

/// Descriptor of the perturbed side of `pair`, labelled with the pair's label.
pub fn fingerprint_paired(
    pair: &PairedSample,
    rec: &dyn Reconstructor,
    bins: usize,
    base_image_id: impl Into<String>,
) -> Result<Fingerprint> {
    let spectra = fingerprint_pair(pair)?;
    let delta_profile = radial_profile_plane(&spectra.delta.delta);
    let (result, residual) = detect(pair.perturbed(), rec, f64::INFINITY, Some(pair.clean()), bins)?;
    build_fingerprint(
        Some(&spectra.perturbed_profile),
        Some(PerturbationEvidence {
            delta_profile: Some(&delta_profile),
            residual: Some(&residual),
            entropy: Some(result.entropy),
        }),
        base_image_id,
        pair.label(),
    )
}

/// Per-dimension z-scores (population std). Constant dimensions are dropped;
/// the kept column indices are returned alongside.
pub fn zscore(fps: &[Fingerprint]) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let Some(first) = fps.first() else {
        return Err(Error::arg("no fingerprints"));
    };
    let d = first.vector.len();
    if let Some(bad) = fps.iter().find(|f| f.vector.len() != d) {
        return Err(Error::DimensionMismatch {
            left: d.to_string(),
            right: bad.vector.len().to_string(),
        });
    }
    let n = fps.len() as f64;
    let mut kept = Vec::new();
    let mut stats = Vec::new();
    for j in 0..d {
        let mean = fps.iter().map(|f| f.vector[j]).sum::<f64>() / n;
        let std = (fps.iter().map(|f| (f.vector[j] - mean).powi(2)).sum::<f64>() / n).sqrt();
        if std > 1e-12 * mean.abs().max(1.0) {
            kept.push(j);
            stats.push((mean, std));
        }
    }
    if kept.len() < d {
        log::info!("dropped {} constant fingerprint dimension(s) of {d}", d - kept.len());
    }
    let z = fps
        .iter()
        .map(|f| kept.iter().zip(&stats).map(|(&j, &(m, s))| (f.vector[j] - m) / s).collect())
        .collect();
    Ok((z, kept))
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Euclidean distances between z-scored fingerprints.
pub fn distance_matrix(fps: &[Fingerprint]) -> Result<Vec<Vec<f64>>> {
    if fps.len() < 2 {
        return Err(Error::arg("distance matrix needs at least 2 fingerprints"));
    }
    let (z, _) = zscore(fps)?;
    let n = z.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = euclidean(&z[i], &z[j]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    Ok(d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding2D {
    pub points: Vec<(f64, f64)>,
    pub method: String,
    /// Fewer than two non-trivial components; the second axis is zero.
    pub degenerate: bool,
    /// Variance along each axis.
    pub variance: [f64; 2],
}

/// First two principal components of the z-scored set. Each axis is
/// oriented so its largest-magnitude loading is positive.
pub fn project_2d(fps: &[Fingerprint]) -> Result<Embedding2D> {
    let n = fps.len();
    if n < 3 {
        return Err(Error::arg("projection needs at least 3 fingerprints"));
    }
    let (z, kept) = zscore(fps)?;
    let d = kept.len();
    if d == 0 {
        return Ok(Embedding2D {
            points: vec![(0.0, 0.0); n],
            method: "pca".into(),
            degenerate: true,
            variance: [0.0; 2],
        });
    }
    let x = DMatrix::from_fn(n, d, |i, j| z[i][j]);
    let cov = x.transpose() * &x / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let lead = eig.eigenvalues[order[0]].max(0.0);
    let mut axes = Vec::new();
    let mut variance = [0.0; 2];
    for (k, &idx) in order.iter().take(2).enumerate() {
        let ev = eig.eigenvalues[idx];
        if ev <= RANK_TOLERANCE * lead.max(f64::MIN_POSITIVE) {
            break;
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        variance[k] = ev;
        axes.push(v);
    }
    let project = |row: &[f64], axis: Option<&Vec<f64>>| {
        axis.map(|a| row.iter().zip(a).map(|(p, q)| p * q).sum::<f64>()).unwrap_or(0.0)
    };
    let points = z
        .iter()
        .map(|row| (project(row, axes.first()), project(row, axes.get(1))))
        .collect();
    Ok(Embedding2D {
        points,
        method: "pca".into(),
        degenerate: axes.len() < 2,
        variance,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    BaseImage,
    ProtectionLabel,
}

/// Mean silhouette of `labels` under the distances `d`. Points in
/// singleton groups score 0.
pub fn silhouette(d: &[Vec<f64>], labels: &[&str]) -> Result<f64> {
    let n = labels.len();
    if d.len() != n {
        return Err(Error::DimensionMismatch {
            left: d.len().to_string(),
            right: n.to_string(),
        });
    }
    let mut groups: Vec<&str> = labels.to_vec();
    groups.sort_unstable();
    groups.dedup();
    let size = |g: &str| labels.iter().filter(|&&l| l == g).count();
    if groups.len() < 2 {
        return Err(Error::UndefinedScore("silhouette needs at least 2 groups".into()));
    }
    if groups.iter().all(|g| size(g) < 2) {
        return Err(Error::UndefinedScore("every group is a singleton".into()));
    }
    let mut total = 0.0;
    for i in 0..n {
        let mean_to = |g: &str| {
            let (s, c) = (0..n)
                .filter(|&j| j != i && labels[j] == g)
                .fold((0.0, 0usize), |(s, c), j| (s + d[i][j], c + 1));
            if c == 0 {
                None
            } else {
                Some(s / c as f64)
            }
        };
        let Some(a) = mean_to(labels[i]) else { continue };
        let b = groups
            .iter()
            .filter(|&&g| g != labels[i])
            .filter_map(|g| mean_to(g))
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

/// Silhouette of the fingerprints grouped by one of their tags.
pub fn cluster_quality(fps: &[Fingerprint], grouping: Grouping) -> Result<f64> {
    let d = distance_matrix(fps)?;
    let labels: Vec<&str> = fps
        .iter()
        .map(|f| match grouping {
            Grouping::BaseImage => f.base_image_id.as_str(),
            Grouping::ProtectionLabel => f.protection_label.as_str(),
        })
        .collect();
    silhouette(&d, &labels)
}

/// `base_image_id,protection_label,f000..f131`.
pub fn fingerprints_csv(fps: &[Fingerprint]) -> String {
    let d = fps.first().map_or(DIMS, |f| f.vector.len());
    let mut out = String::from("base_image_id,protection_label");
    for j in 0..d {
        out.push_str(&format!(",f{j:03}"));
    }
    out.push('\n');
    for f in fps {
        out.push_str(&format!("{},{}", f.base_image_id, f.protection_label));
        for v in &f.vector {
            out.push_str(&format!(",{v:.9e}"));
        }
        out.push('\n');
    }
    out
}

/// `base_image_id,protection_label,x,y`.
pub fn embedding_csv(fps: &[Fingerprint], emb: &Embedding2D) -> String {
    let mut out = String::from("base_image_id,protection_label,x,y\n");
    for (f, (x, y)) in fps.iter().zip(&emb.points) {
        out.push_str(&format!("{},{},{x:.6},{y:.6}\n", f.base_image_id, f.protection_label));
    }
    out
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Scatter plot coloured by protection label, each point annotated with its
/// base image id.
pub fn embedding_svg(fps: &[Fingerprint], emb: &Embedding2D) -> String {
    const SIZE: f64 = 480.0;
    const PAD: f64 = 40.0;
    let mut labels: Vec<&str> = Vec::new();
    for f in fps {
        if !labels.contains(&f.protection_label.as_str()) {
            labels.push(&f.protection_label);
        }
    }
    let extent = emb
        .points
        .iter()
        .fold(0.0f64, |m, &(x, y)| m.max(x.abs()).max(y.abs()))
        .max(1e-9);
    let scale = (SIZE / 2.0 - PAD) / extent;
    let c = SIZE / 2.0;
    let legend_h = 18.0 * labels.len() as f64;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"10\">\n",
        w = SIZE,
        h = SIZE + legend_h + 10.0
    );
    out.push_str(&format!(
        "<rect width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\" stroke=\"#ccc\"/>\n\
         <line x1=\"{PAD}\" y1=\"{c}\" x2=\"{e}\" y2=\"{c}\" stroke=\"#eee\"/>\n\
         <line x1=\"{c}\" y1=\"{PAD}\" x2=\"{c}\" y2=\"{e}\" stroke=\"#eee\"/>\n",
        e = SIZE - PAD
    ));
    for (f, &(x, y)) in fps.iter().zip(&emb.points) {
        let k = labels.iter().position(|l| *l == f.protection_label).unwrap_or(0);
        let (px, py) = (c + x * scale, c - y * scale);
        out.push_str(&format!(
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"5\" fill=\"{}\" fill-opacity=\"0.8\"><title>{} / {}</title></circle>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" fill=\"#444\">{}</text>\n",
            PALETTE[k % PALETTE.len()],
            xml_escape(&f.base_image_id),
            xml_escape(&f.protection_label),
            px + 7.0,
            py + 3.0,
            xml_escape(&f.base_image_id)
        ));
    }
    for (k, l) in labels.iter().enumerate() {
        let y = SIZE + 14.0 + 18.0 * k as f64;
        out.push_str(&format!(
            "<rect x=\"10\" y=\"{:.0}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"26\" y=\"{y:.0}\">{}</text>\n",
            y - 9.0,
            PALETTE[k % PALETTE.len()],
            xml_escape(l)
        ));
    }
    out.push_str("</svg>\n");
    out
}
