//! Purification by subtraction and its effect on PSNR.
//!
//!     cargo run --release --example purify_pair [OUT_DIR]

use std::path::PathBuf;

use perturbscope::detection::{psnr, purify, HighPassResidual, PairedDiff};
use perturbscope::image::{f32_to_u8, load_png, save_png};
use perturbscope::synthesis::{proxy_pair, ProxyProtection};

fn main() -> perturbscope::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "example-out/purify".into()));
    std::fs::create_dir_all(&out).map_err(|e| perturbscope::Error::Pipeline(e.to_string()))?;
    let base = load_png(concat!(env!("CARGO_MANIFEST_DIR"), "/testdata/astronaut_128.png"))?.to_rgb();
    let pair = proxy_pair(&base, ProxyProtection::FineTexture, 5)?;

    println!("protected vs clean: {:.2} dB", psnr(pair.perturbed(), pair.clean())?);
    let paired = purify(pair.perturbed(), &PairedDiff, Some(pair.clean()))?;
    println!("paired-diff purified: {:.2} dB", psnr(&paired, pair.clean())?);
    let blind = purify(pair.perturbed(), &HighPassResidual::default(), None)?;
    println!("highpass purified: {:.2} dB", psnr(&blind, pair.clean())?);

    save_png(&f32_to_u8(pair.perturbed()), out.join("protected.png"))?;
    save_png(&f32_to_u8(&blind), out.join("highpass_purified.png"))?;
    println!("images in {}", out.display());
    Ok(())
}
