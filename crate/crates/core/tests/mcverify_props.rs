use qnglab::*;

fn curve() -> ThresholdCurve {
    qng_threshold_numeric(2, 3, &GridSpec { points: 80, ..GridSpec::default() }).unwrap()
}

fn run_on(threads: usize, spec: &SamplerSpec, curve: &ThresholdCurve) -> VerifyReport {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| run_verification(spec, curve)).unwrap()
}

#[test]
fn reports_are_reproducible_across_workers() {
    let c = curve();
    for family in [Family::Gaussian1m, Family::GaussianProduct3m] {
        let spec = SamplerSpec::new(family, 5_000, 11);
        let base = serde_json::to_string(&run_on(1, &spec, &c)).unwrap();
        assert_eq!(base, serde_json::to_string(&run_on(1, &spec, &c)).unwrap());
        assert_eq!(base, serde_json::to_string(&run_on(3, &spec, &c)).unwrap());
    }
    let other = run_on(1, &SamplerSpec::new(Family::Gaussian1m, 5_000, 12), &c);
    assert_ne!(other, run_on(1, &SamplerSpec::new(Family::Gaussian1m, 5_000, 11), &c));
}

#[test]
fn partial_chunks_and_nearest_ordering() {
    let c = curve();
    let r = run_verification(&SamplerSpec::new(Family::Gaussian1m, 2_500, 5), &c).unwrap();
    assert_eq!(r.cycles, 2_500);
    assert_eq!(r.violations, 0);
    assert!(r.nearest.len() <= DEFAULT_TOP_K && !r.nearest.is_empty());
    assert!(r.nearest.windows(2).all(|w| (w[0].distance, w[0].index) <= (w[1].distance, w[1].index)));
    assert!(r.nearest.iter().all(|p| p.index < 2_500));
    for p in &r.nearest {
        let d = distance_to_curve(&c, p.success_prob, p.error_prob).unwrap();
        assert!((d - p.distance).abs() < 1e-15);
    }
    let csv = nearest_csv(&r);
    assert!(csv.starts_with("index,error_prob,success_prob,threshold,distance\n"));
    assert_eq!(csv.lines().count(), r.nearest.len() + 1);
}

#[test]
fn optimizer_states_sit_on_the_curve() {
    let grid = GridSpec { points: 80, ..GridSpec::default() };
    let c = curve();
    let ts = qnglab::numeric::logspace(grid.t_min, grid.t_max, grid.points);
    let mut best = f64::INFINITY;
    for &t in &ts[30..40] {
        for (_, s, e) in multiplex_witnesses(2, 3, t, grid.scan).unwrap() {
            best = best.min(distance_to_curve(&c, s, e).unwrap().abs());
        }
    }
    assert!(best < 1e-6, "closest witness distance {best}");
}

#[test]
fn invalid_specs_are_rejected() {
    let c = curve();
    assert!(run_verification(&SamplerSpec::new(Family::Gaussian1m, 0, 1), &c).is_err());
    let mut bad = SamplerSpec::new(Family::Gaussian1m, 10, 1);
    bad.ranges.variance = [0.0, 1.0];
    assert!(run_verification(&bad, &c).is_err());
    assert!(run_verification(&SamplerSpec::new(Family::ModulatedCore { n: 2 }, 10, 1), &c).is_err());
    let json = r#"{"family":"modulated-core","n":3,"ranges":{"alpha":[0,1],"variance":[0.1,1],"phase":[0,6.2]},"cycles":10,"seed":4}"#;
    let spec: SamplerSpec = serde_json::from_str(json).unwrap();
    assert_eq!(spec.family, Family::ModulatedCore { n: 3 });
}
