use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::detection::DetectionResult;
use crate::error::{Error, Result};

use super::manifest::{artifact_row, ArtifactRow, RunManifest};

pub const REPORT_NAME: &str = "report.html";
const REPORT_STAGE: &str = "report";

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn csv_table(text: &str) -> String {
    let mut out = String::from("<table>\n");
    for (i, line) in text.lines().enumerate() {
        let tag = if i == 0 { "th" } else { "td" };
        out.push_str("<tr>");
        for cell in line.split(',') {
            out.push_str(&format!("<{tag}>{}</{tag}>", esc(cell)));
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</table>\n");
    out
}

struct PairPanel<'a> {
    id: String,
    files: BTreeMap<&'a str, &'a str>,
}

fn pair_panels(artifacts: &[ArtifactRow]) -> Vec<PairPanel<'_>> {
    let mut by_dir: BTreeMap<&str, PairPanel<'_>> = BTreeMap::new();
    for a in artifacts {
        let Some((dir, name)) = a.path.rsplit_once('/') else { continue };
        if !matches!(a.stage.as_str(), "occlusion" | "spectral" | "detection") || a.inputs.len() != 1 {
            continue;
        }
        by_dir
            .entry(dir)
            .or_insert_with(|| PairPanel {
                id: a.inputs[0].clone(),
                files: BTreeMap::new(),
            })
            .files
            .insert(name, a.path.as_str());
    }
    by_dir.into_values().filter(|p| p.files.contains_key("delta_f.png")).collect()
}

fn read(dir: &Path, rel: &str) -> Result<String> {
    let p = dir.join(rel);
    std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
}

fn render(run_dir: &Path, manifest: &RunManifest) -> Result<String> {
    let find = |name: &str| manifest.artifacts.iter().find(|a| a.path == name).map(|a| a.path.as_str());
    let mut h = String::new();
    h.push_str(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>perturbscope report</title>\n<style>\n\
         body{font-family:sans-serif;margin:2em;color:#222}\n\
         table{border-collapse:collapse;margin:1em 0}td,th{border:1px solid #ccc;padding:2px 8px;text-align:right}\n\
         .pair{border-top:1px solid #ddd;padding:1em 0}.pair img{width:220px;margin-right:8px;image-rendering:pixelated}\n\
         .notice{color:#a33}figure{display:inline-block;margin:0 8px 8px 0}figcaption{font-size:80%;color:#555}\n\
         </style>\n</head>\n<body>\n",
    );
    h.push_str(&format!(
        "<h1>perturbscope report</h1>\n<p>{} {} &middot; command <code>{}</code> &middot; master seed {} &middot; {} artifacts</p>\n",
        esc(&manifest.tool),
        esc(&manifest.version),
        esc(&manifest.command),
        manifest.config.master_seed,
        manifest.artifacts.len()
    ));

    if let Some(p) = find("detection_summary.csv") {
        h.push_str("<h2>Detection summary</h2>\n");
        h.push_str(&csv_table(&read(run_dir, p)?));
    }
    if let Some(p) = find("cluster_quality.json") {
        let v: serde_json::Value = serde_json::from_str(&read(run_dir, p)?).map_err(|source| Error::Json {
            context: p.into(),
            source,
        })?;
        h.push_str("<h2>Fingerprint clusters</h2>\n<table>\n");
        for key in ["samples", "silhouette_by_base", "silhouette_by_label"] {
            let cell = match &v[key] {
                serde_json::Value::Number(n) => n.as_f64().map_or(n.to_string(), |f| {
                    if f.fract() == 0.0 { format!("{f}") } else { format!("{f:.4}") }
                }),
                _ => "undefined".into(),
            };
            h.push_str(&format!("<tr><th>{key}</th><td>{cell}</td></tr>\n"));
        }
        h.push_str("</table>\n");
        if let Some(notes) = v["notes"].as_array() {
            for n in notes.iter().filter_map(|n| n.as_str()) {
                h.push_str(&format!("<p class=\"notice\">{}</p>\n", esc(n)));
            }
        }
    }
    if let Some(p) = find("embedding.svg") {
        h.push_str("<h2>Fingerprint embedding (PCA)</h2>\n");
        h.push_str(&read(run_dir, p)?);
    }
    let aggregates: Vec<&ArtifactRow> = manifest
        .artifacts
        .iter()
        .filter(|a| a.path.starts_with("aggregate/") && a.path.ends_with(".png"))
        .collect();
    if !aggregates.is_empty() {
        h.push_str("<h2>Aggregate occlusion sensitivity</h2>\n<div>\n");
        for a in aggregates {
            h.push_str(&format!(
                "<figure><img src=\"{}\" width=\"220\" alt=\"\"><figcaption>{}</figcaption></figure>\n",
                esc(&a.path),
                esc(a.inputs.first().map_or("", String::as_str))
            ));
        }
        h.push_str("</div>\n");
    }

    let panels = pair_panels(&manifest.artifacts);
    h.push_str(&format!("<h2>Pairs ({})</h2>\n", panels.len()));
    if panels.is_empty() {
        h.push_str("<p class=\"notice\">no samples</p>\n");
    }
    for panel in &panels {
        h.push_str(&format!("<div class=\"pair\" id=\"{0}\">\n<h3>{0}</h3>\n", esc(&panel.id)));
        if let Some(p) = panel.files.get("detection.json") {
            let r: DetectionResult = serde_json::from_str(&read(run_dir, p)?).map_err(|source| Error::Json {
                context: (*p).into(),
                source,
            })?;
            h.push_str(&format!(
                "<p>entropy {:.4} bits, threshold {}, {} ({})</p>\n",
                r.entropy,
                r.threshold,
                if r.detected { "detected" } else { "not detected" },
                esc(&r.reconstructor_id)
            ));
        }
        for (name, caption) in [
            ("delta_f.png", "spectral difference"),
            ("spectrum_clean.png", "clean spectrum"),
            ("spectrum_perturbed.png", "perturbed spectrum"),
            ("sensitivity.png", "occlusion sensitivity"),
            ("radial.svg", "radial profiles"),
        ] {
            if let Some(p) = panel.files.get(name) {
                h.push_str(&format!(
                    "<figure><img src=\"{}\" alt=\"{caption}\"><figcaption>{caption}</figcaption></figure>\n",
                    esc(p)
                ));
            }
        }
        h.push_str("</div>\n");
    }
    h.push_str("</body>\n</html>\n");
    Ok(h)
}

/// `report`: a static HTML page over a finished run, added to its manifest.
///
/// Only files listed in the manifest are referenced; any listed file that
/// is missing or changed aborts the report.
pub fn cmd_report(run_dir: &Path) -> Result<PathBuf> {
    let mut manifest = RunManifest::read(run_dir)?;
    manifest.artifacts.retain(|a| a.stage != REPORT_STAGE);
    let dangling = manifest.dangling(run_dir);
    if !dangling.is_empty() {
        return Err(Error::Pipeline(format!(
            "manifest lists {} missing or modified file(s): {}",
            dangling.len(),
            dangling.join(", ")
        )));
    }
    let html = render(run_dir, &manifest)?;
    let path = run_dir.join(REPORT_NAME);
    std::fs::write(&path, html).map_err(|e| Error::io(&path, e))?;
    manifest
        .artifacts
        .push(artifact_row(run_dir, REPORT_STAGE, &[], Path::new(REPORT_NAME))?);
    manifest.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
    manifest.write(run_dir)?;
    Ok(path)
}
