use gendim::mfa::{correlation_curves, local_dimension, spectrum, CorrelationCurve, NeighborIndex, RadiusGrid};
use gendim::synth::{sample_cascade, CascadeSpec};
use gendim::{PointCloud, Weights};
use proptest::prelude::*;
use rand::Rng;

fn random_cloud(n: usize, dim: usize, seed: u64) -> PointCloud {
    let mut rng = gendim::rng::stream_rng(seed, 0);
    let coords = (0..n * dim).map(|_| rng.gen::<f64>()).collect();
    PointCloud::uniform(dim, coords, "random").unwrap()
}

fn curves(cloud: &PointCloud, qs: &[f64], grid: &RadiusGrid, theiler: usize) -> Vec<CorrelationCurve> {
    correlation_curves(&NeighborIndex::build(cloud), qs, grid, theiler).unwrap()
}

fn log_sums(c: &CorrelationCurve) -> Vec<f64> {
    c.points.iter().map(|p| p.log_sum).collect()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x.is_nan() && y.is_nan()) || (x - y).abs() <= tol * (1.0 + x.abs()))
}

const QS: [f64; 6] = [-2.0, 0.0, 0.5, 1.0, 2.0, 4.0];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn index_counts_match_brute_force(n in 1usize..2000, dim in 1usize..4, seed in any::<u64>()) {
        let cloud = random_cloud(n, dim, seed);
        let index = NeighborIndex::build(&cloud);
        let mut rng = gendim::rng::stream_rng(seed, 1);
        for _ in 0..100 {
            let i = rng.gen_range(0..n);
            let r = rng.gen::<f64>() * 0.6;
            let c = cloud.point(i);
            let brute = cloud.points().filter(|p| {
                p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= r * r
            }).count();
            prop_assert_eq!(index.count_ball(c, r), brute);
        }
    }

    #[test]
    fn scaling_points_and_radii_keeps_log_sums(seed in any::<u64>(), k in -3i32..4) {
        let cloud = random_cloud(600, 2, seed);
        let grid = RadiusGrid::decades(0.3, 1.5, 8).unwrap();
        let s = 2f64.powi(k);
        let a = curves(&cloud, &QS, &grid, 0);
        let b = curves(&cloud.scaled(s), &QS, &grid.scaled(s), 0);
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(log_sums(x), log_sums(y));
        }
    }

    #[test]
    fn scaling_by_any_factor_keeps_fitted_dimensions(seed in any::<u64>(), s in 0.01..100.0f64) {
        let cloud = random_cloud(800, 2, seed);
        let grid = RadiusGrid::decades(0.3, 1.5, 12).unwrap();
        let a = spectrum(&NeighborIndex::build(&cloud), &QS, &grid, 0).unwrap();
        let b = spectrum(&NeighborIndex::build(&cloud.scaled(s)), &QS, &grid.scaled(s), 0).unwrap();
        for q in QS {
            let (x, y) = (a.dq(q), b.dq(q));
            prop_assert!(x.zip(y).map_or(x.is_none() && y.is_none(), |(x, y)| (x - y).abs() < 1e-9));
        }
    }

    #[test]
    fn duplicating_points_at_half_weight_keeps_curves(seed in any::<u64>()) {
        let cloud = random_cloud(500, 2, seed);
        let n = cloud.len();
        let doubled = PointCloud::new(
            2,
            [cloud.coords(), cloud.coords()].concat(),
            Weights::Explicit(vec![0.5 / n as f64; 2 * n]),
            "doubled",
        ).unwrap();
        let grid = RadiusGrid::decades(0.3, 1.5, 8).unwrap();
        let a = curves(&cloud, &QS, &grid, 0);
        let b = curves(&doubled, &QS, &grid, 0);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(close(&log_sums(x), &log_sums(y), 1e-12), "q={}: {:?} vs {:?}", x.q, log_sums(x), log_sums(y));
        }
    }

    #[test]
    fn spectrum_is_monotone_on_cascades(p in 0.2..0.45f64, seed in any::<u64>()) {
        let cloud = sample_cascade(&CascadeSpec { p, depth: 20, n_samples: 20_000, seed }).unwrap();
        // negative orders need far larger samples on strongly uneven cascades
        let qs = [0.0, 0.5, 1.0, 2.0, 4.0];
        let sp = spectrum(&NeighborIndex::build(&cloud), &qs, &RadiusGrid::for_cloud(&cloud).unwrap(), 1).unwrap();
        prop_assert!(sp.is_monotone(2.0), "violation {}", sp.monotonicity_violation());
    }
}

fn uniform_interval(n: usize, seed: u64) -> PointCloud {
    random_cloud(n, 1, seed)
}

/// Two decades below 1e-2: inside the interval's scaling regime and away
/// from the O(r) boundary layer.
fn interior_grid() -> RadiusGrid {
    RadiusGrid::decades(1e-2, 2.0, 24).unwrap()
}

#[test]
fn uniform_interval_has_dimension_one() {
    let cloud = uniform_interval(200_000, 31);
    let qs: Vec<f64> = (-2..=5).map(f64::from).collect();
    let sp = spectrum(&NeighborIndex::build(&cloud), &qs, &interior_grid(), 1).unwrap();
    for &q in &qs {
        let d = sp.dq(q).unwrap();
        assert!((d - 1.0).abs() <= 0.05, "q={q}: {d}");
    }
    assert!(sp.is_monotone(2.0), "violation {}", sp.monotonicity_violation());
}

#[test]
fn q_one_agrees_with_neighbouring_orders() {
    let cloud = uniform_interval(200_000, 32);
    let qs = [0.9, 1.0, 1.1];
    let sp = spectrum(&NeighborIndex::build(&cloud), &qs, &interior_grid(), 1).unwrap();
    let limit = 0.5 * (sp.dq(0.9).unwrap() + sp.dq(1.1).unwrap());
    let d1 = sp.dq(1.0).unwrap();
    assert!((d1 - limit).abs() <= 0.05, "D1 {d1} vs {limit}");
}

#[test]
fn local_dimension_of_uniform_measures() {
    let grid = RadiusGrid::geometric(0.1, 0.005, 24).unwrap();
    let line = uniform_interval(200_000, 33);
    let est = local_dimension(&NeighborIndex::build(&line), &[0.5], &grid).unwrap();
    assert!((est.d_est - 1.0).abs() <= 0.05, "interval {}", est.d_est);
    let square = random_cloud(200_000, 2, 34);
    let grid = RadiusGrid::geometric(0.1, 0.01, 24).unwrap();
    let est = local_dimension(&NeighborIndex::build(&square), &[0.5, 0.5], &grid).unwrap();
    assert!((est.d_est - 2.0).abs() <= 0.1, "square {}", est.d_est);
    assert!(est.d_est >= 0.0);
}

#[test]
fn local_dimension_outside_the_cloud_is_rejected() {
    let cloud = uniform_interval(1000, 35);
    let grid = RadiusGrid::geometric(0.1, 0.005, 24).unwrap();
    assert!(local_dimension(&NeighborIndex::build(&cloud), &[3.0], &grid).is_err());
}

#[test]
fn dirac_spectrum_is_exactly_zero() {
    let cloud = PointCloud::uniform(3, [1.0, 2.0, 3.0].repeat(400), "dirac").unwrap();
    let grid = RadiusGrid::decades(1.0, 3.0, 8).unwrap();
    let sp = spectrum(&NeighborIndex::build(&cloud), &QS, &grid, 0).unwrap();
    for q in QS {
        assert_eq!(sp.dq(q), Some(0.0), "q={q}");
    }
}
