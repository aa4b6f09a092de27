//! Render a reduced synthesis grid over the bundled photograph and print
//! the oracle entropy of every sample.
//!
//!     cargo run --release --example synth_grid [OUT_DIR]

use perturbscope::detection::shannon_entropy;
use perturbscope::image::{u8_to_f32, PerturbationMap};
use perturbscope::pipeline::{cmd_synth, RunConfig};
use perturbscope::pmap;
use perturbscope::synthesis::{MaskKind, NoiseKind};

fn main() -> perturbscope::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "example-out/synth_grid".into());
    let mut cfg = RunConfig {
        output_dir: out.into(),
        master_seed: 7,
        ..RunConfig::default()
    };
    cfg.synthesis.grid.masks = vec![MaskKind::Uniform, MaskKind::PerlinLow];
    cfg.synthesis.grid.noises = vec![NoiseKind::Gauss, NoiseKind::Gauss4x];
    cfg.synthesis.grid.lightness = vec![0.2, 0.5, 0.8];

    let manifest = cmd_synth(&cfg)?;
    println!("{} artifacts in {}", manifest.artifacts.len(), cfg.output_dir.display());

    let base = u8_to_f32(&perturbscope::image::load_png(cfg.output_dir.join("base.png"))?);
    println!("base {}x{}", base.height(), base.width());
    for a in manifest.artifacts.iter().filter(|a| a.path.ends_with(".pmap")) {
        let delta = PerturbationMap::from_plane(&pmap::load(cfg.output_dir.join(&a.path))?)?;
        println!("{:<40} {:.3} bits", a.inputs[0], shannon_entropy(&delta, 256)?);
    }
    Ok(())
}
