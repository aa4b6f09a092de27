//! Batch over a small grid followed by the static HTML report.
//!
//!     cargo run --release --example batch_report [OUT_DIR]

use perturbscope::pipeline::{cmd_batch, cmd_report, InputSpec, RunConfig};
use perturbscope::synthesis::{MaskKind, NoiseKind};

fn main() -> perturbscope::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "example-out/batch".into());
    let mut cfg = RunConfig {
        output_dir: out.into(),
        input: InputSpec::Grid {
            base: Some(concat!(env!("CARGO_MANIFEST_DIR"), "/testdata/astronaut_128.png").into()),
        },
        ..RunConfig::default()
    };
    cfg.synthesis.grid.masks = vec![MaskKind::Uniform, MaskKind::RadialGradient, MaskKind::Clouds2];
    cfg.synthesis.grid.noises = vec![NoiseKind::Gauss, NoiseKind::Gauss4x, NoiseKind::ResidualGlaze];
    cfg.synthesis.grid.lightness = vec![0.2, 0.5, 0.8];
    cfg.occlusion.window = 16;
    cfg.occlusion.stride = 8;

    let run = cmd_batch(&cfg)?;
    for row in &run.summary {
        println!(
            "{:<10} {:<16} n={:<3} {}",
            row.group_kind,
            row.group_value,
            row.n,
            row.mean_entropy_bits.map_or("-".into(), |e| format!("{e:.3} bits"))
        );
    }
    println!("report: {}", cmd_report(&cfg.output_dir)?.display());
    Ok(())
}
