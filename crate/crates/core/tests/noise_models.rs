use nfteig_core::nft::{find_discrete_eigenvalues, Scheme, SearchConfig};
use nfteig_core::nlse::Propagator;
use nfteig_core::noise::{apply_transceiver_noise, decompose_noise, tracked_spectrum, TransceiverNoiseSpec};
use nfteig_core::rng::run_rng;
use nfteig_core::soliton::sech_pulse;
use nfteig_core::stats::{angle_difference, covariance_summary, Ensemble2D};
use nfteig_core::{Complex64, TimeGrid};
use proptest::prelude::*;

fn grid() -> TimeGrid {
    TimeGrid::symmetric(16.0, 1024).unwrap()
}

fn search() -> SearchConfig {
    SearchConfig {
        re_min: -0.5,
        re_max: 0.5,
        im_max: 2.0,
        compute_amplitudes: false,
        ..SearchConfig::default()
    }
}

#[test]
fn decomposition_splits_noise_along_and_across_the_signal() {
    let q = sech_pulse(2.0, &grid()).unwrap();
    let mut p = Propagator::new(grid());
    let n = p.noise(0.01, 0.5, &mut run_rng(5, 0, 0)).unwrap();
    let d = decompose_noise(&q, &n).unwrap();

    assert!(d.residual.inner(&q).unwrap().norm() < 1e-12 * q.energy());
    // The scaling part is c·q for one complex c.
    let c = d.scaling.samples()[512] / q.samples()[512];
    let rebuilt = q.scale(c);
    assert!(d.scaling.max_abs_diff(&rebuilt).unwrap() < 1e-12);
    let sum = d.scaling.add(&d.residual).unwrap();
    assert!(sum.max_abs_diff(&n).unwrap() < 1e-12 * n.max_abs());
}

#[test]
fn constant_phase_rotation_leaves_the_spectrum_untouched() {
    let q = sech_pulse(2.0, &grid()).unwrap();
    let baseline = find_discrete_eigenvalues(&q, &search()).unwrap().spectrum.eigenvalues;
    assert_eq!(baseline.len(), 2);
    for (i, b0) in [0.013, -0.2, 0.37].into_iter().enumerate() {
        let spec = TransceiverNoiseSpec {
            b0,
            ..TransceiverNoiseSpec::default()
        };
        let rotated = apply_transceiver_noise(&q, &spec, &mut run_rng(1, 0, i as u64)).unwrap();
        let tracked = tracked_spectrum(&rotated, &baseline, &search(), 0.8).unwrap();
        for (a, b) in tracked.iter().zip(&baseline) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }
}

#[test]
fn real_gain_rescales_the_spectrum() {
    let q = sech_pulse(2.0, &TimeGrid::symmetric(16.0, 2048).unwrap()).unwrap();
    let spec = TransceiverNoiseSpec {
        a0: Complex64::new(1.1, 0.0),
        ..TransceiverNoiseSpec::default()
    };
    let out = apply_transceiver_noise(&q, &spec, &mut run_rng(1, 0, 0)).unwrap();
    let al = SearchConfig {
        scheme: Scheme::AblowitzLadik,
        ..search()
    };
    let s = find_discrete_eigenvalues(&out, &al).unwrap().spectrum;
    // 2.2·sech has eigenvalues 0.7j and 1.7j.
    for (l, expected) in s.eigenvalues.iter().zip([0.7, 1.7]) {
        assert!((l.im - expected).abs() < 1e-3, "{l}");
    }
}

fn cloud(seed: u64, rho: f64) -> Vec<[f64; 2]> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut rng = run_rng(seed, 0, 0);
    (0..200)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            [a, rho * a + (1.0 - rho * rho).sqrt() * b + 0.3 * b]
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn correlation_is_invariant_under_positive_affine_maps(
        seed in any::<u64>(),
        rho in -0.9f64..0.9,
        sx in 0.01f64..100.0,
        sy in 0.01f64..100.0,
        ox in -10.0f64..10.0,
        oy in -10.0f64..10.0,
    ) {
        let pts = cloud(seed, rho);
        let mapped: Vec<[f64; 2]> = pts.iter().map(|p| [sx * p[0] + ox, sy * p[1] + oy]).collect();
        let r0 = covariance_summary(&Ensemble2D::new(pts).unwrap()).unwrap().correlation.unwrap();
        let r1 = covariance_summary(&Ensemble2D::new(mapped).unwrap()).unwrap().correlation.unwrap();
        prop_assert!((r0 - r1).abs() < 1e-9, "{} vs {}", r0, r1);
    }

    #[test]
    fn principal_angle_follows_rotations(
        seed in any::<u64>(),
        rho in 0.3f64..0.9,
        phi in -3.0f64..3.0,
    ) {
        let pts = cloud(seed, rho);
        let (s, c) = phi.sin_cos();
        let rotated: Vec<[f64; 2]> = pts.iter().map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]]).collect();
        let a0 = covariance_summary(&Ensemble2D::new(pts).unwrap()).unwrap().principal_angle.unwrap();
        let a1 = covariance_summary(&Ensemble2D::new(rotated).unwrap()).unwrap().principal_angle.unwrap();
        prop_assert!(angle_difference(a1, a0 + phi).abs() < 1e-9, "{} {} {}", a0, a1, phi);
    }
}
