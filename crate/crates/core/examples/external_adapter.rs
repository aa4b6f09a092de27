//! Plugging an external reconstructor in via the file protocol: the program
//! is called as `PROGRAM [ARGS..] input.png output.pmap`.
//!
//! The default command here is a shell one-liner that answers with an
//! all-zero map (a valid, if uninformative, reconstructor).
//!
//!     cargo run --release --example external_adapter [-- "CMD"]

use std::time::Duration;

use perturbscope::detection::{detect, ExternalReconstructor, DEFAULT_THRESHOLD};
use perturbscope::image::{load_png, u8_to_f32, Plane};
use perturbscope::pmap;

fn main() -> perturbscope::Result<()> {
    let img = u8_to_f32(&load_png(concat!(env!("CARGO_MANIFEST_DIR"), "/testdata/camera_128.png"))?.to_rgb());
    let dir = tempfile::tempdir().map_err(|e| perturbscope::Error::Pipeline(e.to_string()))?;
    let zeros = dir.path().join("zeros.pmap");
    pmap::save(&Plane::zeros(img.height(), img.width()), &zeros)?;
    let script = dir.path().join("zeros.sh");
    std::fs::write(&script, format!("cp {} \"$2\"\n", zeros.display()))
        .map_err(|e| perturbscope::Error::Pipeline(e.to_string()))?;

    let cmd = std::env::args()
        .nth(1)
        .unwrap_or_else(|| format!("sh {}", script.display()));
    let rec = ExternalReconstructor::from_command(&cmd, Duration::from_secs(60))?;
    match detect(&img, &rec, DEFAULT_THRESHOLD, None, 256) {
        Ok((r, _)) => println!("{}: {:.4} bits, detected {}", r.reconstructor_id, r.entropy, r.detected),
        Err(e) => println!("adapter failed: {e}"),
    }
    Ok(())
}
