//! Log-magnitude spectra, the signed spectral difference and radial
//! profiles of a clean/protected pair.
//!
//!     cargo run --release --example spectral_fingerprint [OUT_DIR]

use std::path::PathBuf;

use perturbscope::image::load_png;
use perturbscope::pipeline::viz;
use perturbscope::spectral::{fingerprint_pair, radial_profile_plane};
use perturbscope::synthesis::{proxy_pair, ProxyProtection};

fn main() -> perturbscope::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "example-out/spectral".into()));
    std::fs::create_dir_all(&out).map_err(|e| perturbscope::Error::Pipeline(e.to_string()))?;
    let base = load_png(concat!(env!("CARGO_MANIFEST_DIR"), "/testdata/coffee_128.png"))?.to_rgb();

    for style in [ProxyProtection::FineTexture, ProxyProtection::SmoothField] {
        let pair = proxy_pair(&base, style, 3)?;
        let s = fingerprint_pair(&pair)?;
        let delta = radial_profile_plane(&s.delta.delta);
        let r_max = delta.r_max();
        let band = |lo: usize, hi: usize| {
            let v: Vec<f64> = (lo..hi).filter(|&r| !delta.empty[r]).map(|r| delta.magnitudes[r]).collect();
            v.iter().sum::<f64>() / v.len().max(1) as f64
        };
        println!(
            "{:<14} mean dF low {:+.4}  mid {:+.4}  high {:+.4}",
            style.label(),
            band(1, r_max / 4),
            band(r_max / 4, r_max / 2),
            band(r_max / 2, r_max + 1)
        );
        viz::save_diverging(&s.delta.delta, &out.join(format!("{}_delta_f.png", style.label())))?;
        std::fs::write(
            out.join(format!("{}_radial.svg", style.label())),
            viz::profile_svg(&[("clean", &s.clean_profile), ("protected", &s.perturbed_profile)]),
        )
        .map_err(|e| perturbscope::Error::Pipeline(e.to_string()))?;
    }
    println!("figures in {}", out.display());
    Ok(())
}
