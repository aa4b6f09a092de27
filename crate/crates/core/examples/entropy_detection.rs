//! Entropy detection with the three built-in reconstructors.
//!
//!     cargo run --release --example entropy_detection

use perturbscope::detection::{detect, HighPassResidual, Oracle, PairedDiff, Reconstructor, DEFAULT_THRESHOLD};
use perturbscope::image::{load_png, u8_to_f32, PerturbationMap};
use perturbscope::synthesis::{proxy_pair, ProxyProtection};

fn main() -> perturbscope::Result<()> {
    let base = load_png(concat!(env!("CARGO_MANIFEST_DIR"), "/testdata/rocket_128.png"))?.to_rgb();
    let clean = u8_to_f32(&base);
    let pair = proxy_pair(&base, ProxyProtection::Stacked, 11)?;
    let truth = PerturbationMap::difference(pair.perturbed(), pair.clean())?;

    let recs: Vec<Box<dyn Reconstructor>> = vec![
        Box::new(Oracle::new(truth)),
        Box::new(PairedDiff),
        Box::new(HighPassResidual::default()),
    ];
    println!("{:<18} {:>10} {:>10}", "reconstructor", "clean", "protected");
    for rec in &recs {
        let zero = Oracle::new(PerturbationMap::zeros(clean.height(), clean.width()));
        let on_clean = if rec.id() == "oracle" {
            detect(&clean, &zero, DEFAULT_THRESHOLD, Some(&clean), 256)?.0
        } else {
            detect(&clean, rec.as_ref(), DEFAULT_THRESHOLD, Some(&clean), 256)?.0
        };
        let on_pert = detect(pair.perturbed(), rec.as_ref(), DEFAULT_THRESHOLD, Some(&clean), 256)?.0;
        println!(
            "{:<18} {:>6.3}{:>4} {:>6.3}{:>4}",
            rec.id(),
            on_clean.entropy,
            if on_clean.detected { "*" } else { "" },
            on_pert.entropy,
            if on_pert.detected { "*" } else { "" },
        );
    }
    println!("* = above {DEFAULT_THRESHOLD} bits");
    Ok(())
}
