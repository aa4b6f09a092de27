//! Library results against independent reference implementations.

mod common;

use perturbscope::detection::{entropy_of, purify, subtract, PairedDiff};
use perturbscope::image::{ImageF32, PairedSample, PerturbationMap, Plane};
use perturbscope::occlusion::{sensitivity_map, OcclusionConfig, OverlapMode};
use perturbscope::pmap;
use perturbscope::spectral::{fft_log_magnitude, fft_shift, ifft_shift, radial_profile_plane, ring_index};
use perturbscope::synthesis::solve_gamma;
use proptest::prelude::*;

fn u8_plane(h: usize, w: usize) -> impl Strategy<Value = (usize, usize, Vec<u8>)> {
    prop::collection::vec(any::<u8>(), h * w).prop_map(move |v| (h, w, v))
}

fn sized_u8(max: usize) -> impl Strategy<Value = (usize, usize, Vec<u8>)> {
    (1..=max, 1..=max).prop_flat_map(|(h, w)| u8_plane(h, w))
}

fn to_image(h: usize, w: usize, c: usize, v: &[u8]) -> ImageF32 {
    ImageF32::new(h, w, c, v.iter().map(|&b| b as f32 / 255.0).collect()).unwrap()
}

#[test]
fn delta_image_spectrum_is_flat_log2() {
    let g = ImageF32::new(2, 2, 1, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let s = fft_log_magnitude(&g).unwrap();
    for &v in s.mag.data() {
        assert!((v as f64 - 2f64.ln()).abs() < 1e-6);
    }
}

#[test]
fn constant_image_has_energy_only_at_centre() {
    let g = ImageF32::filled(5, 4, 1, 0.5).unwrap();
    let s = fft_log_magnitude(&g).unwrap();
    for y in 0..5 {
        for x in 0..4 {
            let v = s.mag.get(y, x) as f64;
            if (y, x) == (2, 2) {
                assert!((v - 11f64.ln()).abs() < 1e-6, "{v}");
            } else {
                assert!(v.abs() < 1e-6, "({y},{x}) = {v}");
            }
        }
    }
}

#[test]
fn occlusion_hand_example() {
    let clean = ImageF32::new(2, 2, 1, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let pair = PairedSample::new(clean.clone(), clean, "same").unwrap();
    let cfg = OcclusionConfig {
        window: 1,
        stride: 1,
        ..OcclusionConfig::default()
    };
    let got = sensitivity_map(&pair, &cfg).unwrap();
    assert_eq!(got.plane.data(), &[0.25, 0.0, 0.0, 0.0]);
    assert_eq!(got.plane, common::naive_occlusion(&pair, &cfg));
}

#[test]
fn gamma_solve_matches_closed_form() {
    let g = solve_gamma(&[0.25, 1.0], 0.75).unwrap();
    assert!((g - 0.5).abs() < 1e-6, "{g}");
    let g = solve_gamma(&[0.25, 1.0], 0.625).unwrap();
    assert!((g - 1.0).abs() < 1e-6, "{g}");
}

#[test]
fn radial_rings_partition_the_plane() {
    for (h, w) in [(1, 1), (2, 2), (3, 5), (8, 8), (9, 4)] {
        let p = radial_profile_plane(&Plane::zeros(h, w));
        assert_eq!(p.ring_sizes.iter().sum::<usize>(), h * w);
        assert_eq!(ring_index(h, w)[(h / 2) * w + w / 2], 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_matches_direct_sum((h, w, v) in (2usize..=7, 2usize..=7).prop_flat_map(|(h, w)| u8_plane(h, w))) {
        let g = to_image(h, w, 1, &v);
        let got = fft_log_magnitude(&g).unwrap();
        let want = common::dft_log_magnitude(h, w, &g.data().iter().map(|&x| x as f64).collect::<Vec<_>>());
        for (&a, &b) in got.mag.data().iter().zip(&want) {
            prop_assert!((a as f64 - b).abs() / b.abs().max(1e-3) < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn shift_inverse_any_dims((h, w, v) in sized_u8(9)) {
        let p = Plane::new(h, w, v.iter().map(|&b| b as f32).collect()).unwrap();
        prop_assert_eq!(ifft_shift(&fft_shift(&p)), p.clone());
        prop_assert_eq!(fft_shift(&ifft_shift(&p)), p);
    }

    #[test]
    fn occlusion_matches_brute_force(
        (h, w, clean) in sized_u8(12),
        seed in any::<u64>(),
        wf in 0.0f64..1.0,
        sf in 0.0f64..1.0,
        average in any::<bool>(),
    ) {
        let pert: Vec<u8> = clean.iter().enumerate().map(|(i, &b)| b ^ (seed.rotate_left(i as u32) as u8)).collect();
        let pair = PairedSample::new(to_image(h, w, 1, &clean), to_image(h, w, 1, &pert), "p").unwrap();
        let window = 1 + (wf * h.min(w) as f64) as usize;
        let window = window.min(h.min(w));
        let stride = (1 + (sf * window as f64) as usize).min(window);
        let cfg = OcclusionConfig {
            window,
            stride,
            baseline_value: 0.0,
            overlap_mode: if average { OverlapMode::Average } else { OverlapMode::Overwrite },
        };
        let got = sensitivity_map(&pair, &cfg).unwrap();
        prop_assert_eq!(got.plane, common::naive_occlusion(&pair, &cfg));
    }

    #[test]
    fn paired_purify_restores_clean((h, w, a) in sized_u8(10), shift in any::<u8>()) {
        let b: Vec<u8> = a.iter().map(|&x| x.wrapping_add(shift)).collect();
        let clean = to_image(h, w, 1, &a);
        let pert = to_image(h, w, 1, &b);
        prop_assert_eq!(purify(&pert, &PairedDiff, Some(&clean)).unwrap(), clean.clone());
        let delta = PerturbationMap::difference(&pert, &clean).unwrap();
        prop_assert_eq!(subtract(&pert, &delta).unwrap(), clean);
    }

    #[test]
    fn entropy_is_bounded_by_log2_of_count(v in prop::collection::vec(-10.0f64..10.0, 1..300)) {
        let e = entropy_of(&v, 256).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert!(e <= (v.len() as f64).log2().min(8.0) + 1e-12);
    }

    #[test]
    fn pmap_roundtrip((h, w, v) in sized_u8(16)) {
        let p = Plane::new(h, w, v.iter().map(|&b| b as f32 / 7.0 - 3.0).collect()).unwrap();
        prop_assert_eq!(pmap::decode(&pmap::encode(&p)).unwrap(), p);
    }
}
