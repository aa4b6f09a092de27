//! Fingerprints of five photographs, clean and under two protection
//! styles, projected to 2-D and scored by silhouette.
//!
//!     cargo run --release --example fingerprint_clusters [OUT_DIR]

use std::path::PathBuf;

use perturbscope::detection::PairedDiff;
use perturbscope::fingerprint::{
    cluster_quality, embedding_svg, fingerprint_clean, fingerprint_paired, project_2d, Grouping,
};
use perturbscope::image::{load_png, u8_to_f32};
use perturbscope::synthesis::{proxy_pair, ProxyProtection};

fn main() -> perturbscope::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "example-out/clusters".into()));
    std::fs::create_dir_all(&out).map_err(|e| perturbscope::Error::Pipeline(e.to_string()))?;
    let mut fps = Vec::new();
    for (i, id) in ["astronaut", "camera", "coffee", "chelsea", "rocket"].iter().enumerate() {
        let path = format!("{}/testdata/{id}_128.png", env!("CARGO_MANIFEST_DIR"));
        let base = load_png(path)?.to_rgb();
        fps.push(fingerprint_clean(&u8_to_f32(&base), *id)?);
        for style in [ProxyProtection::FineTexture, ProxyProtection::SmoothField] {
            fps.push(fingerprint_paired(&proxy_pair(&base, style, i as u64)?, &PairedDiff, 256, *id)?);
        }
    }
    let emb = project_2d(&fps)?;
    for (f, p) in fps.iter().zip(&emb.points) {
        println!("{:<10} {:<14} {:+8.3} {:+8.3}", f.base_image_id, f.protection_label, p.0, p.1);
    }
    println!(
        "silhouette by base {:.3}, by label {:.3}",
        cluster_quality(&fps, Grouping::BaseImage)?,
        cluster_quality(&fps, Grouping::ProtectionLabel)?
    );
    std::fs::write(out.join("embedding.svg"), embedding_svg(&fps, &emb))
        .map_err(|e| perturbscope::Error::Pipeline(e.to_string()))?;
    Ok(())
}
