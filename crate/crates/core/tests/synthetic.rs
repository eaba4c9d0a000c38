use gendim::mfa::{local_dimension, spectrum, NeighborIndex, RadiusGrid};
use gendim::synth::{
    analytic_dq_cascade, build_suspension_cloud, embed_diffeo, graph_cloud, ks_statistic, sample_cascade,
    sample_singular_density, CascadeSpec, Diffeo, Roof, Side, SingularDensitySpec, SuspensionSampleSpec,
};
use gendim::PointCloud;

/// 99% Kolmogorov–Smirnov critical value for `n` draws.
fn ks_critical(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Binomial cascade CDF, weight `p` on the left half at every level.
fn cascade_cdf(p: f64, depth: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if depth == 0 {
        return x;
    }
    if x < 0.5 {
        p * cascade_cdf(p, depth - 1, 2.0 * x)
    } else {
        p + (1.0 - p) * cascade_cdf(p, depth - 1, 2.0 * x - 1.0)
    }
}

#[test]
fn singular_sampler_passes_ks() {
    let spec = SingularDensitySpec::uniform(0.0, 1.0).with_singularity(0.0, 0.5, Side::RightOfXk, 0.5);
    let n = 100_000;
    let cloud = sample_singular_density(&spec, n, 3).unwrap();
    // ∫₀ˣ (1 + 0.5 t^(-1/2)) dt = x + √x, total 2
    let d = ks_statistic(cloud.coords(), |x| (x + x.sqrt()) / 2.0);
    assert!(d < ks_critical(n), "KS {d}");
}

#[test]
fn left_sided_singularity_passes_ks() {
    let spec = SingularDensitySpec::uniform(-1.0, 1.0).with_singularity(0.5, 0.3, Side::LeftOfXk, 2.0);
    let n = 100_000;
    let cloud = sample_singular_density(&spec, n, 4).unwrap();
    // ψ₀ = 1 on [-1, 1]; 2 |x - 0.5|^(-0.3) on [-1, 0.5)
    let g = |x: f64| 2.0 * (0.5 - x).powf(0.7) / 0.7;
    let total = 2.0 + g(-1.0);
    let cdf = |x: f64| {
        let x = x.clamp(-1.0, 1.0);
        let sing = if x < 0.5 { g(-1.0) - g(x) } else { g(-1.0) };
        (x + 1.0 + sing) / total
    };
    let d = ks_statistic(cloud.coords(), cdf);
    assert!(d < ks_critical(n), "KS {d}");
}

#[test]
fn cascade_sampler_passes_ks() {
    let n = 100_000;
    let cloud = sample_cascade(&CascadeSpec {
        p: 0.3,
        depth: 16,
        n_samples: n,
        seed: 5,
    })
    .unwrap();
    let d = ks_statistic(cloud.coords(), |x| cascade_cdf(0.3, 16, x));
    assert!(d < ks_critical(n), "KS {d}");
}

#[test]
fn suspension_sampler_passes_ks() {
    let base_n = 200_000;
    let coords: Vec<f64> = (0..base_n).map(|i| (i as f64 + 0.5) / base_n as f64).collect();
    let base = PointCloud::uniform(1, coords, "grid").unwrap();
    let n = 100_000;
    let cloud = build_suspension_cloud(&SuspensionSampleSpec {
        roof: Roof::from_fn(&base, |x| 1.0 + x[0]),
        base_cloud: base,
        n_samples: n,
        seed: 6,
    })
    .unwrap();
    // base marginal ∝ 1 + x; height given x uniform on [0, 1 + x)
    let xs: Vec<f64> = cloud.points().map(|p| p[0]).collect();
    let d = ks_statistic(&xs, |x| (x + x * x / 2.0) / 1.5);
    assert!(d < ks_critical(n), "base KS {d}");
    let fractions: Vec<f64> = cloud.points().map(|p| p[1] / (1.0 + p[0])).collect();
    let d = ks_statistic(&fractions, |u| u.clamp(0.0, 1.0));
    assert!(d < ks_critical(n), "height KS {d}");
}

#[test]
fn cascade_partition_sums_match_closed_form() {
    let p: f64 = 0.3;
    let depth = 12;
    for q in [-2.0, 0.0, 0.5, 2.0, 3.0, 5.0] {
        let sum: f64 = (0u32..1 << depth)
            .map(|cell| {
                let right = cell.count_ones() as i32;
                (p.powi(depth - right) * (1.0 - p).powi(right)).powf(q)
            })
            .sum();
        let dq = sum.log2() / (1.0 - q) / depth as f64;
        assert!((dq - analytic_dq_cascade(p, q)).abs() < 1e-12, "q={q}: {dq}");
    }
    let entropy: f64 = (0u32..1 << depth)
        .map(|cell| {
            let right = cell.count_ones() as i32;
            let m = p.powi(depth - right) * (1.0 - p).powi(right);
            -m * m.log2()
        })
        .sum::<f64>()
        / depth as f64;
    assert!((entropy - analytic_dq_cascade(p, 1.0)).abs() < 1e-12);
}

fn dq_on(cloud: &PointCloud, qs: &[f64], grid: &RadiusGrid) -> Vec<f64> {
    let sp = spectrum(&NeighborIndex::build(cloud), qs, grid, 1).unwrap();
    qs.iter().map(|&q| sp.dq(q).unwrap()).collect()
}

#[test]
fn graph_cloud_has_the_dimensions_of_its_base() {
    let base = sample_cascade(&CascadeSpec {
        p: 0.3,
        depth: 20,
        n_samples: 50_000,
        seed: 7,
    })
    .unwrap();
    let graph = graph_cloud(&base, |y| 0.4 * (3.0 * y).sin() + 0.2 * y * y).unwrap();
    let qs = [0.0, 2.0, 4.0];
    let grid = RadiusGrid::decades(0.1, 2.5, 24).unwrap();
    let a = dq_on(&base, &qs, &grid);
    let b = dq_on(&graph, &qs, &grid);
    for k in 0..qs.len() {
        assert!((a[k] - b[k]).abs() <= 0.07, "q={}: base {} graph {}", qs[k], a[k], b[k]);
    }
}

#[test]
fn smooth_shear_preserves_the_spectrum() {
    let base = sample_cascade(&CascadeSpec {
        p: 0.3,
        depth: 20,
        n_samples: 20_000,
        seed: 8,
    })
    .unwrap();
    let susp = build_suspension_cloud(&SuspensionSampleSpec {
        base_cloud: base,
        roof: Roof::Constant(1.0),
        n_samples: 50_000,
        seed: 9,
    })
    .unwrap();
    let sheared = embed_diffeo(&susp, Diffeo::SmoothShear).unwrap();
    let qs = [0.0, 2.0];
    let grid = RadiusGrid::decades(0.1, 1.5, 24).unwrap();
    let a = dq_on(&susp, &qs, &grid);
    let b = dq_on(&sheared, &qs, &grid);
    for k in 0..qs.len() {
        assert!((a[k] - b[k]).abs() <= 0.07, "q={}: {} vs {}", qs[k], a[k], b[k]);
    }
}

#[test]
fn suspension_adds_one_to_local_dimension() {
    // the cascade's local dimension at 0 is log₂(1/p)
    let p: f64 = 0.7;
    let base = sample_cascade(&CascadeSpec {
        p,
        depth: 24,
        n_samples: 400_000,
        seed: 10,
    })
    .unwrap();
    let susp = build_suspension_cloud(&SuspensionSampleSpec {
        base_cloud: base,
        roof: Roof::Constant(1.0),
        n_samples: 400_000,
        seed: 11,
    })
    .unwrap();
    let x_min = susp.points().map(|q| q[0]).fold(f64::INFINITY, f64::min);
    let index = NeighborIndex::build(&susp);
    let grid = RadiusGrid::geometric(0.2, 0.01, 24).unwrap();
    let est = local_dimension(&index, &[x_min, 0.5], &grid).unwrap();
    let want = (1.0 / p).log2() + 1.0;
    assert!((est.d_est - want).abs() <= 0.15, "{} vs {want}", est.d_est);
}
