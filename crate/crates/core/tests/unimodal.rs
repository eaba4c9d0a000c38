use gendim::unimodal::{
    classify, fit_unimodal, lyapunov_exponent, lyapunov_over_seeds, schwarzian_scan, AttractorCase, FnMap, IntervalMap,
};

fn logistic(r: f64) -> FnMap<impl Fn(f64) -> f64 + Sync, impl Fn(f64) -> f64 + Sync> {
    FnMap {
        domain: (0.0, 1.0),
        f: move |y: f64| r * y * (1.0 - y),
        df: move |y: f64| r * (1.0 - 2.0 * y),
        critical: Some(0.5),
    }
}

/// Noisy orbit pairs of the logistic map at `r`.
fn logistic_pairs(r: f64, n: usize) -> Vec<(f64, f64)> {
    let mut y: f64 = 0.123;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let next = r * y * (1.0 - y);
        out.push((y, next));
        y = next;
    }
    out
}

#[test]
fn segment_stderr_is_small_on_analytic_maps() {
    let est = lyapunov_exponent(&logistic(4.0), 0.3, 1_000_000, 1_000).unwrap();
    assert!(est.stderr < 0.05, "stderr {}", est.stderr);
    assert!((est.lambda - 2f64.ln()).abs() < 0.01, "lambda {}", est.lambda);
}

#[test]
fn fitted_critical_point_is_a_strict_maximum() {
    let map = fit_unimodal(&logistic_pairs(3.9, 3000)).unwrap();
    let c = map.critical_point();
    assert!((c - 0.5).abs() < 1e-3, "critical point {c}");
    assert!(map.has_maximum());
    assert!(map.second_derivative(c) < 0.0);
    let (v, dl, dr) = (map.value(c), map.value(c - 1e-3), map.value(c + 1e-3));
    assert!(v > dl && v > dr);
}

#[test]
fn chaotic_fitted_map_is_absolutely_continuous_case() {
    let map = fit_unimodal(&logistic_pairs(3.9, 3000)).unwrap();
    let (lo, hi) = map.domain();
    let seeds: Vec<f64> = (1..=5).map(|k| lo + (hi - lo) * k as f64 / 6.0).collect();
    let est = lyapunov_over_seeds(&map, &seeds, 200_000, 1_000).unwrap();
    assert!(est.lambda > 0.4, "lambda {}", est.lambda);
    assert!(est.spread < 0.05, "spread {}", est.spread);
    assert_eq!(classify(&map, &est).case, AttractorCase::AbsolutelyContinuous);
    assert!(schwarzian_scan(&map, 200).unwrap().negative_fraction > 0.95);
}

#[test]
fn periodic_window_is_a_finite_cycle() {
    // period-3 window of the logistic family
    let map = logistic(3.83);
    let est = lyapunov_over_seeds(&map, &[0.2, 0.4, 0.7], 50_000, 5_000).unwrap();
    let c = classify(&map, &est);
    assert_eq!(c.case, AttractorCase::FiniteCycle);
    assert_eq!(c.evidence.period, Some(3));
}
