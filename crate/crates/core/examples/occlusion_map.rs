//! Occlusion sensitivity of a protected image against its clean source,
//! in both overlap modes.
//!
//!     cargo run --release --example occlusion_map [OUT_DIR]

use std::path::PathBuf;

use perturbscope::image::{load_png, u8_to_f32};
use perturbscope::occlusion::{normalize_map, sensitivity_map, OcclusionConfig, OverlapMode};
use perturbscope::pipeline::viz;
use perturbscope::synthesis::{proxy_pair, ProxyProtection};

fn main() -> perturbscope::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "example-out/occlusion".into()));
    std::fs::create_dir_all(&out).map_err(|e| perturbscope::Error::Pipeline(e.to_string()))?;
    let base = load_png(concat!(env!("CARGO_MANIFEST_DIR"), "/testdata/chelsea_128.png"))?.to_rgb();
    let pair = proxy_pair(&base, ProxyProtection::FineTexture, 1)?;
    println!("clean {}x{}", u8_to_f32(&base).height(), u8_to_f32(&base).width());

    for mode in [OverlapMode::Overwrite, OverlapMode::Average] {
        let cfg = OcclusionConfig {
            window: 16,
            stride: 8,
            overlap_mode: mode,
            ..OcclusionConfig::default()
        };
        let map = sensitivity_map(&pair, &cfg)?;
        let (lo, hi) = map
            .plane
            .data()
            .iter()
            .fold((f32::MAX, f32::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        let path = out.join(format!("sensitivity_{mode:?}.png").to_lowercase());
        viz::save_heatmap(&normalize_map(&map).plane, &path)?;
        println!("{mode:?}: scores {lo:.5}..{hi:.5}, {} uncovered, {}", map.info.uncovered_pixels, path.display());
    }
    Ok(())
}
