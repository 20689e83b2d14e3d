use num_complex::Complex64;

use super::*;
use crate::error::Error;
use crate::grid::{Signal, TimeGrid};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn sech_signal(amplitude: f64, half_width: f64, n: usize) -> Signal {
    let g = TimeGrid::symmetric(half_width, n).unwrap();
    Signal::from_fn(g, |t| c(amplitude / t.cosh(), 0.0)).unwrap()
}

/// Fourth-order Runge-Kutta on the continuous scattering ODE with `q`
/// evaluated analytically; integrates over the same window as the schemes.
fn rk4_oracle(
    q: impl Fn(f64) -> Complex64,
    t1: f64,
    t2: f64,
    lambda: Complex64,
    steps: usize,
) -> (Complex64, Complex64) {
    let j = c(0.0, 1.0);
    let rhs = |t: f64, v: [Complex64; 2]| {
        let qt = q(t);
        [-j * lambda * v[0] + qt * v[1], -qt.conj() * v[0] + j * lambda * v[1]]
    };
    let h = (t2 - t1) / steps as f64;
    let mut v = [(-j * lambda * t1).exp(), c(0.0, 0.0)];
    let mut t = t1;
    let axpy = |v: [Complex64; 2], k: [Complex64; 2], s: f64| [v[0] + k[0] * s, v[1] + k[1] * s];
    for _ in 0..steps {
        let k1 = rhs(t, v);
        let k2 = rhs(t + h / 2.0, axpy(v, k1, h / 2.0));
        let k3 = rhs(t + h / 2.0, axpy(v, k2, h / 2.0));
        let k4 = rhs(t + h, axpy(v, k3, h));
        v = [
            v[0] + (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) * (h / 6.0),
            v[1] + (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) * (h / 6.0),
        ];
        t += h;
    }
    (v[0] * (j * lambda * t2).exp(), v[1] * (-j * lambda * t2).exp())
}

#[test]
fn zero_signal_gives_identity_scattering() {
    let g = TimeGrid::symmetric(16.0, 2048).unwrap();
    let q = Signal::zeros(g);
    for scheme in [Scheme::ForwardDifference, Scheme::AblowitzLadik] {
        for lambda in [c(0.0, 0.5), c(1.3, 0.2), c(-0.7, 2.5), c(0.4, 0.0)] {
            let s = scatter(&q, lambda, scheme).unwrap();
            assert!((s.a - 1.0).norm() < 1e-12, "{scheme:?} {lambda}: a = {}", s.a);
            assert_eq!(s.b, c(0.0, 0.0));
        }
    }
}

#[test]
fn two_soliton_eigenvalues_null_a() {
    let q = sech_signal(2.0, 16.0, 2048);
    let fd = scatter_forward_difference(&q, c(0.0, 0.5)).unwrap();
    assert!(fd.a.norm() < 1e-3, "|a(0.5j)| = {}", fd.a.norm());
    let al = scatter_ablowitz_ladik(&q, c(0.0, 1.5)).unwrap();
    assert!(al.a.norm() < 1e-3, "|a(1.5j)| = {}", al.a.norm());
}

#[test]
fn lower_half_plane_is_rejected() {
    let q = sech_signal(1.0, 16.0, 256);
    assert!(matches!(
        scatter_forward_difference(&q, c(0.0, -0.1)),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn large_imaginary_lambda_does_not_overflow() {
    let q = sech_signal(2.0, 200.0, 4096);
    let problem = ScatteringProblem::new(&q, Scheme::AblowitzLadik);
    let lambda = c(0.3, 3.0);
    let a = problem.a(lambda).unwrap();
    let exact = (lambda - c(0.0, 0.5)) * (lambda - c(0.0, 1.5)) / ((lambda + c(0.0, 0.5)) * (lambda + c(0.0, 1.5)));
    assert!((a - exact).norm() < 0.02, "{a} vs {exact}");
    // b itself grows like exp(2·Im λ·T) and cannot be represented.
    assert!(matches!(
        scatter_ablowitz_ladik(&q, c(0.3, 3.0)),
        Err(Error::Range { .. })
    ));
}

/// The spec'd forward-difference recursion is first order in Δt away from
/// eigenvalues; Ablowitz-Ladik is second order. Both converge to the RK4
/// oracle at their respective rates.
#[test]
fn real_axis_a_converges_to_rk4_oracle() {
    let lambda = c(1.0, 0.0);
    let mut errs = Vec::new();
    for n in [1024usize, 2048, 4096] {
        let q = sech_signal(2.0, 16.0, n);
        let dt = q.grid().dt();
        let (t1, t2) = (-16.0 - dt / 2.0, 16.0 - dt / 2.0);
        let (a_ref, _) = rk4_oracle(|t| c(2.0 / t.cosh(), 0.0), t1, t2, lambda, 8 * n);
        let fd = scatter_forward_difference(&q, lambda).unwrap().a;
        let al = scatter_ablowitz_ladik(&q, lambda).unwrap().a;
        errs.push(((fd - a_ref).norm() / a_ref.norm(), (al - a_ref).norm() / a_ref.norm()));
    }
    for w in errs.windows(2) {
        let fd_ratio = w[0].0 / w[1].0;
        let al_ratio = w[0].1 / w[1].1;
        assert!(
            (1.8..2.2).contains(&fd_ratio),
            "forward difference order ratio {fd_ratio}"
        );
        assert!((3.6..4.4).contains(&al_ratio), "Ablowitz-Ladik order ratio {al_ratio}");
    }
    // N = 2048 errors, frozen from the oracle run.
    assert!(errs[1].0 < 7e-2 && errs[1].1 < 1.1e-3, "{:?}", errs[1]);
}

#[test]
fn schemes_converge_to_each_other() {
    let mut last = f64::INFINITY;
    for n in [512usize, 1024, 2048] {
        let q = sech_signal(2.0, 16.0, n);
        let fd = scatter_forward_difference(&q, c(0.0, 0.8)).unwrap().a;
        let al = scatter_ablowitz_ladik(&q, c(0.0, 0.8)).unwrap().a;
        let d = (fd - al).norm();
        assert!(d < last, "N = {n}: |a_AL − a_FD| = {d} did not shrink from {last}");
        last = d;
    }
}

#[test]
fn ablowitz_ladik_is_unitary_on_real_axis() {
    let g = TimeGrid::symmetric(16.0, 2048).unwrap();
    let pulses = [
        sech_signal(2.0, 16.0, 2048),
        sech_signal(0.7, 16.0, 2048),
        Signal::from_fn(g, |t| c(1.3 / t.cosh(), 0.0) * c(0.0, 0.4 * t).exp()).unwrap(),
    ];
    for q in &pulses {
        for lambda in [-1.5, -0.3, 0.0, 0.5, 2.0] {
            let s = scatter_ablowitz_ladik(q, c(lambda, 0.0)).unwrap();
            let u = s.a.norm_sqr() + s.b.norm_sqr();
            assert!((u - 1.0).abs() < 1e-3, "λ = {lambda}: |a|²+|b|² = {u}");
        }
    }
    // The Euler recursion is not norm preserving: growth ≈ exp(E·Δt).
    let q = &pulses[0];
    let s = scatter_forward_difference(q, c(1.0, 0.0)).unwrap();
    let u = s.a.norm_sqr() + s.b.norm_sqr();
    let predicted = (q.energy() * q.grid().dt()).exp();
    assert!((u - predicted).abs() < 0.02, "{u} vs {predicted}");
}

#[test]
fn derivative_is_finite_at_fundamental_soliton() {
    let q = sech_signal(1.0, 16.0, 2048);
    let d = a_derivative(&q, c(0.0, 0.5), Scheme::ForwardDifference).unwrap();
    // Exact value 1/(λ − λ*) = −j for the continuum problem.
    assert!(d.norm() > 0.5 && d.norm() < 2.0);
}

#[test]
fn derivative_matches_richardson_oracle() {
    let q = sech_signal(2.0, 16.0, 2048);
    let lambda = c(0.0, 0.5);
    let problem = ScatteringProblem::new(&q, Scheme::ForwardDifference);
    let central = |h: f64| problem.a_derivative_with_step(lambda, h).unwrap();
    let (h1, h2) = (4e-3, 2e-3);
    let oracle = (central(h2) * 4.0 - central(h1)) / 3.0;
    let d = a_derivative(&q, lambda, Scheme::ForwardDifference).unwrap();
    assert!((d - oracle).norm() / oracle.norm() < 1e-4, "{d} vs {oracle}");
    // Halving the production step changes the estimate by less than 1e-4.
    let half = problem
        .a_derivative_with_step(lambda, derivative_step(lambda) / 2.0)
        .unwrap();
    assert!((d - half).norm() / d.norm() < 1e-4);
}

#[test]
fn zero_signal_derivative_is_degenerate() {
    let q = Signal::zeros(TimeGrid::symmetric(16.0, 1024).unwrap());
    let err = a_derivative(&q, c(0.0, 1.0), Scheme::ForwardDifference).unwrap_err();
    assert!(matches!(err, Error::DegenerateRoot { .. }), "{err}");
    assert!(discrete_amplitude(&q, c(0.0, 1.0), Scheme::AblowitzLadik).is_err());
}

fn search_cfg(scheme: Scheme) -> SearchConfig {
    SearchConfig {
        scheme,
        ..SearchConfig::default()
    }
}

fn assert_spectrum(found: &DiscreteSpectrum, expected: &[Complex64], tol: f64) {
    assert_eq!(found.len(), expected.len(), "found {:?}", found.eigenvalues);
    for (f, e) in found.eigenvalues.iter().zip(expected) {
        assert!((f - e).norm() < tol, "found {f}, expected {e}");
    }
}

#[test]
fn finds_two_soliton_spectrum() {
    let q = sech_signal(2.0, 16.0, 2048);
    let out = find_discrete_eigenvalues(&q, &SearchConfig::default()).unwrap();
    assert_spectrum(&out.spectrum, &[c(0.0, 0.5), c(0.0, 1.5)], 1e-3);
    assert!(out.spectrum.low_confidence.iter().all(|f| !f));
    assert!(out.spectrum.amplitudes.iter().all(|a| a.norm().is_finite()));
}

#[test]
fn finds_non_integer_sech_spectrum() {
    let q = sech_signal(2.2, 16.0, 2048);
    let out = find_discrete_eigenvalues(&q, &SearchConfig::default()).unwrap();
    assert_spectrum(&out.spectrum, &[c(0.0, 0.7), c(0.0, 1.7)], 1e-3);
}

#[test]
fn low_confidence_flag_near_real_axis() {
    let q = sech_signal(1.6, 16.0, 2048);
    let out = find_discrete_eigenvalues(&q, &SearchConfig::default()).unwrap();
    assert_spectrum(&out.spectrum, &[c(0.0, 0.1), c(0.0, 1.1)], 1e-3);
    assert_eq!(out.spectrum.low_confidence, vec![true, false]);
}

#[test]
fn subcritical_pulse_has_no_spectrum() {
    let q = sech_signal(0.4, 16.0, 2048);
    // Brute-force oracle: |a| on a dense grid never approaches zero.
    let problem = ScatteringProblem::new(&q, Scheme::ForwardDifference);
    let mut min_a = f64::INFINITY;
    for i in 0..=80 {
        for k in 0..=60 {
            let lambda = c(-2.0 + 0.05 * i as f64, 0.01 + 0.05 * k as f64);
            min_a = min_a.min(problem.a(lambda).unwrap().norm());
        }
    }
    assert!(min_a > 0.3, "dense-grid min |a| = {min_a}");
    let out = find_discrete_eigenvalues(&q, &SearchConfig::default()).unwrap();
    assert!(out.spectrum.is_empty(), "{:?}", out.spectrum.eigenvalues);
}

#[test]
fn local_minima_seeding_matches_full_lattice() {
    let q = sech_signal(2.2, 16.0, 1024);
    let fast = find_discrete_eigenvalues(&q, &SearchConfig::default()).unwrap();
    let full = find_discrete_eigenvalues(
        &q,
        &SearchConfig {
            seed_mode: SeedMode::AllLattice,
            compute_amplitudes: false,
            ..SearchConfig::default()
        },
    )
    .unwrap();
    assert_eq!(fast.spectrum.len(), full.spectrum.len());
    for (a, b) in fast.spectrum.eigenvalues.iter().zip(&full.spectrum.eigenvalues) {
        assert!((a - b).norm() < 1e-8);
    }
    assert!(full.report.duplicates > 0);
}

#[test]
fn discretizations_agree_on_eigenvalues() {
    let mut gaps = Vec::new();
    for n in [1024usize, 2048] {
        let q = sech_signal(2.2, 16.0, n);
        let fd = find_discrete_eigenvalues(&q, &search_cfg(Scheme::ForwardDifference)).unwrap();
        let al = find_discrete_eigenvalues(&q, &search_cfg(Scheme::AblowitzLadik)).unwrap();
        assert_eq!(fd.spectrum.len(), al.spectrum.len());
        let gap = fd
            .spectrum
            .eigenvalues
            .iter()
            .zip(&al.spectrum.eigenvalues)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        gaps.push(gap);
    }
    assert!(gaps[1] < 1e-3 && gaps[1] < gaps[0], "{gaps:?}");
}

#[test]
fn amplitude_of_fundamental_soliton() {
    let q = sech_signal(1.0, 16.0, 2048);
    let amp = discrete_amplitude(&q, c(0.0, 0.5), Scheme::AblowitzLadik).unwrap();
    // b = −1 and a'(0.5j) = −j for sech, so Q = −1/(−j) = −j.
    assert!((amp - c(0.0, -1.0)).norm() < 1e-2, "{amp}");
}

#[test]
fn amplitude_shift_action() {
    let t0 = 1.0;
    let g = TimeGrid::symmetric(20.0, 4096).unwrap();
    let q = Signal::from_fn(g, |t| c(1.0 / t.cosh(), 0.0)).unwrap();
    let shifted = Signal::from_fn(g, |t| c(1.0 / (t - t0).cosh(), 0.0)).unwrap();
    let cfg = SearchConfig {
        scheme: Scheme::AblowitzLadik,
        ..SearchConfig::default()
    };
    let base = find_discrete_eigenvalues(&q, &cfg).unwrap().spectrum;
    let moved = find_discrete_eigenvalues(&shifted, &cfg).unwrap().spectrum;
    let ratio = moved.amplitudes[0].norm() / base.amplitudes[0].norm();
    let expected = (2.0 * base.eigenvalues[0].im * t0).exp();
    assert!((ratio / expected - 1.0).abs() < 0.01, "ratio {ratio} vs {expected}");
}

#[test]
fn continuous_amplitude_cases() {
    let zero = Signal::zeros(TimeGrid::symmetric(16.0, 512).unwrap());
    assert_eq!(
        continuous_amplitude(&zero, 0.0, Scheme::ForwardDifference).unwrap(),
        c(0.0, 0.0)
    );

    // Grid refinement self-consistency for 2·sech at λ = 0.5.
    let coarse = continuous_amplitude(&sech_signal(2.0, 16.0, 2048), 0.5, Scheme::AblowitzLadik).unwrap();
    let fine = continuous_amplitude(&sech_signal(2.0, 16.0, 4096), 0.5, Scheme::AblowitzLadik).unwrap();
    assert!((coarse - fine).norm() < 1e-3, "{coarse} vs {fine}");

    // Small-signal limit: Q^(c)(λ) ≈ −∫q*(t)e^{−2jλt}dt = −0.1·π·sech(πλ).
    let q = sech_signal(0.1, 16.0, 2048);
    for lambda in [0.0, 0.25, 0.5] {
        let qc = continuous_amplitude(&q, lambda, Scheme::AblowitzLadik).unwrap();
        let linear = c(
            -0.1 * std::f64::consts::PI / (std::f64::consts::PI * lambda).cosh(),
            0.0,
        );
        assert!(
            (qc - linear).norm() / linear.norm() < 0.05,
            "λ = {lambda}: {qc} vs {linear}"
        );
    }
}
