use qnglab::gauss::PureFockState;
use qnglab::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ABSOLUTE: [f64; 10] = [
    0.4778894124,
    0.5574474177,
    0.5925587004,
    0.6124957198,
    0.6253802748,
    0.6344018266,
    0.6410747957,
    0.6462122156,
    0.6502901642,
    0.6536061269,
];

#[test]
fn absolute_thresholds_match_frozen_values() {
    for (i, frozen) in ABSOLUTE.iter().enumerate() {
        let a = absolute_threshold(i + 1).unwrap();
        assert!(a.value > 0.0 && a.value < 1.0);
        assert!((a.value - frozen).abs() < 1e-9, "n={}: {} vs {frozen}", i + 1, a.value);
    }
    assert!(absolute_threshold(0).is_err() && absolute_threshold(13).is_err());
}

#[test]
fn absolute_thresholds_bound_sampled_cores() {
    for n in 1..=3 {
        let curve = ThresholdCurve::absolute(n, absolute_threshold(n).unwrap().value);
        let spec = SamplerSpec::new(Family::ModulatedCore { n }, 100_000, 31 + n as u64);
        let r = run_verification(&spec, &curve).unwrap();
        assert_eq!(r.violations, 0, "n={n}: max excess {}", r.max_excess);
        assert!(r.max_excess < 0.0);
    }
    let curve = ThresholdCurve::absolute(1, ABSOLUTE[0]);
    let r = run_verification(&SamplerSpec::new(Family::Gaussian1m, 100_000, 3), &curve).unwrap();
    assert_eq!(r.violations, 0);
}

#[test]
fn perturbed_cores_stay_below_the_curve() {
    let curve = genuine_threshold_curve(2, 3, &GridSpec::default()).unwrap();
    let kernel = ClickKernel::new(2, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut trials = 0;
    while trials < 10_000 {
        let lower: f64 = rng.gen_range(-1.0..1.0);
        let alpha = rng.gen_range(0.0..1.5);
        let r: f64 = rng.gen_range(-1.0..1.0);
        let core = ModulatedCore {
            core: CoreState::top_two(1, lower).unwrap(),
            alpha: Complex64::new(alpha + rng.gen_range(-0.05..0.05), 0.0),
            xi_mag: (r + rng.gen_range(-0.05..0.05)).abs(),
            xi_phase: if r >= 0.0 { 0.0 } else { std::f64::consts::PI },
        };
        let (s, e) = kernel.evaluate(&settled_probs(&core, core.mean_photons_bound()).unwrap()).unwrap();
        if e > curve.domain_limit() {
            continue;
        }
        assert!(s <= curve.eval(e).unwrap() + 1e-9, "{core:?} lifts above the curve");
        trials += 1;
    }
}

#[test]
fn modulated_fock_distribution_is_normalized() {
    let m = ModulatedCore {
        core: CoreState::new(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]).unwrap(),
        alpha: Complex64::new(0.7, -0.2),
        xi_mag: 0.4,
        xi_phase: 1.0,
    };
    let d = modulated_core_distribution(&m, 80).unwrap();
    assert!((d.total() - 1.0).abs() < 1e-10 && d.tail < 1e-8);
    assert!(m.photon_distribution(80).unwrap().probs == d.probs);
}

#[test]
fn ensemble_efficiency_differs_from_printed_form_by_root_m() {
    let g = GridSpec::default();
    let single = qng_threshold_numeric(1, 2, &g).unwrap();
    let pair = qng_threshold_numeric(2, 3, &g).unwrap();
    for nbar in [1e-6, 1e-5] {
        let one = ensemble_min_eta(1, nbar, &single).unwrap();
        assert!((one.value / one.approx - 1.0).abs() < 1e-3, "M=1: {one:?}");
        let two = ensemble_min_eta(2, nbar, &pair).unwrap();
        assert!((two.value * 2f64.sqrt() / two.approx - 1.0).abs() < 2e-3, "M=2: {two:?}");
    }
    assert_eq!(ensemble_min_eta(2, 0.0, &pair).unwrap().value, 0.0);
    assert!(ensemble_min_eta(1, 1e-6, &pair).is_err());
}

#[test]
fn genuine_model_condition_scales_as_fourth_root() {
    let curve = genuine_threshold_curve(2, 3, &GridSpec::default()).unwrap();
    let low = genuine_model_condition(2, 1e-6, &curve).unwrap();
    let high = genuine_model_condition(2, 1e-5, &curve).unwrap();
    for f in [low, high] {
        assert!((f.value / f.approx - 0.595).abs() < 0.01, "{f:?}");
    }
    assert!((high.value / low.value / 10f64.powf(0.25) - 1.0).abs() < 0.01);
    assert_eq!(genuine_model_condition(2, 0.0, &curve).unwrap().value, 0.0);
}
