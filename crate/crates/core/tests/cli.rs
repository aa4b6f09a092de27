//! The `perturbscope` binary: argument handling and exit codes.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use perturbscope::image::save_png;

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perturbscope"))
        .args(args)
        .current_dir(cwd)
        .env_remove("PERTURBSCOPE_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn synth_with_restricted_grid() {
    let dir = tempfile::tempdir().unwrap();
    let base = common::testdata("astronaut_128.png");
    let o = run(
        &[
            "synth",
            "--base",
            base.to_str().unwrap(),
            "--masks",
            "uniform",
            "--noises",
            "gauss",
            "--out",
            "run",
            "--workers",
            "2",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let images = std::fs::read_dir(dir.path().join("run/images")).unwrap().count();
    assert_eq!(images, 8);
    assert!(dir.path().join("run/run_manifest.json").exists());
}

#[test]
fn detect_prints_json_and_purify_writes_png() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean.png");
    save_png(&common::small_image("coffee"), &clean).unwrap();
    let pair = perturbscope::synthesis::proxy_pair(
        &common::small_image("coffee"),
        perturbscope::synthesis::ProxyProtection::FineTexture,
        7,
    )
    .unwrap();
    let pert = dir.path().join("pert.png");
    save_png(&perturbscope::image::f32_to_u8(pair.perturbed()), &pert).unwrap();

    let o = run(
        &["detect", "--image", "pert.png", "--clean", "clean.png", "--residual-out", "res.pmap"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r: perturbscope::detection::DetectionResult = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(r.detected);
    assert_eq!(r.reconstructor_id, "paired-diff");
    assert_eq!(perturbscope::pmap::load(dir.path().join("res.pmap")).unwrap().height(), 128);

    let o = run(
        &["purify", "--image", "pert.png", "--clean", "clean.png", "--output", "out.png"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let purified = perturbscope::image::load_png(dir.path().join("out.png")).unwrap();
    assert_eq!(purified.data(), common::small_image("coffee").data());
}

#[test]
fn analyze_pair_missing_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    save_png(&common::small_image("camera"), dir.path().join("a.png")).unwrap();
    let o = run(
        &["analyze-pair", "--clean", "a.png", "--perturbed", "nope.png", "--out", "run"],
        dir.path(),
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("nope.png"), "{}", stderr(&o));
    assert!(!dir.path().join("run/run_manifest.json").exists());
}

#[test]
fn bad_flags_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["synth", "--masks", "sparkle"][..],
        &["detect", "--image", "x.png", "--reconstructor", "magic"][..],
        &["synth", "--overlap", "sideways"][..],
    ] {
        let o = run(args, dir.path());
        assert!(!o.status.success(), "{args:?} accepted");
    }
}

#[test]
fn report_without_run_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["report", "nowhere"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error:"), "{}", stderr(&o));
}
