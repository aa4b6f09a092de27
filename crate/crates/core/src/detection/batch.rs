use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::{load_png, u8_to_f32, PerturbationMap};
use crate::pmap;
use crate::synthesis::GridRow;

use super::{detect, DetectionResult, ReconstructorKind};

/// One image to classify plus whatever references its reconstructor needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSample {
    pub sample_id: String,
    pub mask: Option<String>,
    pub noise: Option<String>,
    pub lightness: Option<f64>,
    pub label: Option<String>,
    pub image: PathBuf,
    pub clean: Option<PathBuf>,
    pub oracle: Option<PathBuf>,
}

impl BatchSample {
    /// A grid row resolved against the directory holding its manifest.
    pub fn from_grid_row(row: &GridRow, root: &Path, clean: Option<PathBuf>) -> Self {
        Self {
            sample_id: row.sample_id(),
            mask: Some(row.mask.to_string()),
            noise: Some(row.noise.to_string()),
            lightness: Some(row.lightness),
            label: None,
            image: root.join(&row.image_path),
            clean,
            oracle: Some(root.join(&row.delta_path)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub sample: BatchSample,
    pub result: Option<DetectionResult>,
    /// Set when the sample could not be scored.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub group_kind: String,
    pub group_value: String,
    pub n: usize,
    pub mean_entropy_bits: Option<f64>,
    pub detect_rate_pct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchDetection {
    pub rows: Vec<DetectionRow>,
    pub summary: Vec<SummaryRow>,
}

impl BatchDetection {
    pub fn failures(&self) -> impl Iterator<Item = &DetectionRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }
}

fn score(
    s: &BatchSample,
    kind: &ReconstructorKind,
    threshold: f64,
    bins: usize,
    timeout: Duration,
) -> Result<DetectionResult> {
    let image = u8_to_f32(&load_png(&s.image)?);
    let clean = s.clean.as_ref().map(load_png).transpose()?.map(|c| u8_to_f32(&c));
    let oracle = match (kind, &s.oracle) {
        (ReconstructorKind::Oracle, Some(p)) => Some(PerturbationMap::from_plane(&pmap::load(p)?)?),
        _ => None,
    };
    let rec = kind.build(oracle, timeout)?;
    Ok(detect(&image, rec.as_ref(), threshold, clean.as_ref(), bins)?.0)
}

/// Scores every sample, keeping failures as flagged rows, and summarizes
/// them with [`summarize`].
///
/// Runs on the current rayon pool; output order follows `samples`.
pub fn batch_detect(
    samples: &[BatchSample],
    kind: &ReconstructorKind,
    threshold: f64,
    bins: usize,
    timeout: Duration,
) -> BatchDetection {
    let rows: Vec<DetectionRow> = samples
        .par_iter()
        .map(|s| match score(s, kind, threshold, bins, timeout) {
            Ok(r) => DetectionRow {
                sample: s.clone(),
                result: Some(r),
                error: None,
            },
            Err(e) => {
                log::warn!("sample {} not scored: {e}", s.sample_id);
                DetectionRow {
                    sample: s.clone(),
                    result: None,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect();
    let summary = summarize(&rows);
    BatchDetection { rows, summary }
}

/// Marginal blocks by mask, noise, lightness and label, in that order,
/// each listing groups by first appearance. Unscored rows are counted out
/// of `n` and listed again under `missing`.
pub fn summarize(rows: &[DetectionRow]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    let keys: [(&str, fn(&BatchSample) -> Option<String>); 4] = [
        ("mask", |s| s.mask.clone()),
        ("noise", |s| s.noise.clone()),
        ("lightness", |s| s.lightness.map(|l| format!("{l:.2}"))),
        ("label", |s| s.label.clone()),
    ];
    for (kind, key) in keys {
        let mut groups: Vec<(String, Vec<&DetectionResult>)> = Vec::new();
        for row in rows {
            let Some(value) = key(&row.sample) else { continue };
            let idx = match groups.iter().position(|(v, _)| *v == value) {
                Some(i) => i,
                None => {
                    groups.push((value, Vec::new()));
                    groups.len() - 1
                }
            };
            if let Some(r) = &row.result {
                groups[idx].1.push(r);
            }
        }
        for (value, results) in groups {
            let n = results.len();
            let (mean, rate) = if n == 0 {
                (None, None)
            } else {
                let mean = results.iter().map(|r| r.entropy).sum::<f64>() / n as f64;
                let hits = results.iter().filter(|r| r.detected).count();
                (Some(mean), Some(100.0 * hits as f64 / n as f64))
            };
            out.push(SummaryRow {
                group_kind: kind.into(),
                group_value: value,
                n,
                mean_entropy_bits: mean,
                detect_rate_pct: rate,
            });
        }
    }
    for row in rows.iter().filter(|r| r.result.is_none()) {
        out.push(SummaryRow {
            group_kind: "missing".into(),
            group_value: row.sample.sample_id.clone(),
            n: 0,
            mean_entropy_bits: None,
            detect_rate_pct: None,
        });
    }
    out
}

/// CSV with header `group_kind,group_value,n,mean_entropy_bits,detect_rate_pct`.
/// Groups without scored samples leave the last two fields empty.
pub fn summary_csv(summary: &[SummaryRow]) -> String {
    let mut out = String::from("group_kind,group_value,n,mean_entropy_bits,detect_rate_pct\n");
    let opt = |v: Option<f64>, prec: usize| v.map(|x| format!("{x:.prec$}")).unwrap_or_default();
    for r in summary {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.group_kind,
            r.group_value,
            r.n,
            opt(r.mean_entropy_bits, 6),
            opt(r.detect_rate_pct, 2)
        ));
    }
    out
}
