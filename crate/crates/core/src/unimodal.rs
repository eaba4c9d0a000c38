//! One-dimensional return maps: smoothing fit, Lyapunov exponent,
//! Schwarzian derivative and the resulting attractor classification.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spline::{default_segments, SmoothingSpline};

pub const MIN_PAIRS: usize = 50;
/// Points in each local quartic refit.
pub const LOCAL_WINDOW: usize = 31;
/// Half-width of the excluded zone around the critical point, as a fraction
/// of the domain length.
pub const CRITICAL_EXCLUSION: f64 = 0.02;
pub const CRITICAL_HIT_TOL: f64 = 1e-12;
pub const MAX_RESTARTS: usize = 10;
pub const MAX_PERIOD: usize = 64;
const LYAPUNOV_SEGMENTS: usize = 10;

/// A map of an interval into the real line with a known derivative.
pub trait IntervalMap: Sync {
    fn domain(&self) -> (f64, f64);
    fn value(&self, y: f64) -> f64;
    fn derivative(&self, y: f64) -> f64;
    fn critical_point(&self) -> Option<f64> {
        None
    }
}

/// Closed-form map, mostly for tests and references.
pub struct FnMap<F, D> {
    pub domain: (f64, f64),
    pub f: F,
    pub df: D,
    pub critical: Option<f64>,
}

impl<F, D> IntervalMap for FnMap<F, D>
where
    F: Fn(f64) -> f64 + Sync,
    D: Fn(f64) -> f64 + Sync,
{
    fn domain(&self) -> (f64, f64) {
        self.domain
    }
    fn value(&self, y: f64) -> f64 {
        (self.f)(y)
    }
    fn derivative(&self, y: f64) -> f64 {
        (self.df)(y)
    }
    fn critical_point(&self) -> Option<f64> {
        self.critical
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Spline segments; defaults to a tenth of the pair count within [8, 100].
    pub n_segments: Option<usize>,
    /// Largest accepted `max |T(y_i) - y_{i+1}|`, relative to the range of
    /// the `y_{i+1}` values.
    pub relative_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_segments: None,
            relative_tolerance: 1e-2,
        }
    }
}

/// Smoothing-spline fit of a unimodal map from `(y_i, y_{i+1})` pairs.
#[derive(Debug, Clone)]
pub struct FittedMap {
    spline: SmoothingSpline,
    domain: (f64, f64),
    critical_point: f64,
    fit_residual: f64,
    /// Pairs sorted by `y`.
    ys: Vec<f64>,
    next: Vec<f64>,
}

impl FittedMap {
    pub fn critical_point(&self) -> f64 {
        self.critical_point
    }

    pub fn fit_residual(&self) -> f64 {
        self.fit_residual
    }

    pub fn spline(&self) -> &SmoothingSpline {
        &self.spline
    }

    pub fn data(&self) -> (&[f64], &[f64]) {
        (&self.ys, &self.next)
    }

    pub fn second_derivative(&self, y: f64) -> f64 {
        self.spline.derivative(y, 2)
    }

    /// Whether the critical point is a maximum.
    pub fn has_maximum(&self) -> bool {
        self.second_derivative(self.critical_point) < 0.0
    }

    /// Length of the zone around the critical point where the Schwarzian is
    /// not evaluated.
    pub fn exclusion_radius(&self) -> f64 {
        CRITICAL_EXCLUSION * (self.domain.1 - self.domain.0)
    }
}

impl IntervalMap for FittedMap {
    fn domain(&self) -> (f64, f64) {
        self.domain
    }
    fn value(&self, y: f64) -> f64 {
        self.spline.value(y)
    }
    fn derivative(&self, y: f64) -> f64 {
        self.spline.derivative(y, 1)
    }
    fn critical_point(&self) -> Option<f64> {
        Some(self.critical_point)
    }
}

pub fn fit_unimodal(pairs: &[(f64, f64)]) -> Result<FittedMap> {
    fit_unimodal_with(pairs, &FitOptions::default())
}

pub fn fit_unimodal_with(pairs: &[(f64, f64)], opts: &FitOptions) -> Result<FittedMap> {
    if pairs.len() < MIN_PAIRS {
        return Err(Error::InsufficientData(format!(
            "{} return pairs; at least {MIN_PAIRS} are needed",
            pairs.len()
        )));
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (ys, next): (Vec<f64>, Vec<f64>) = sorted.into_iter().unzip();
    let n_seg = opts.n_segments.unwrap_or_else(|| default_segments(ys.len()));
    let spline = SmoothingSpline::fit_gcv(&ys, &next, n_seg)?;
    let domain = spline.domain();

    let fit_residual = ys
        .iter()
        .zip(&next)
        .map(|(y, v)| (spline.value(*y) - v).abs())
        .fold(0.0, f64::max);
    let range =
        next.iter().copied().fold(f64::NEG_INFINITY, f64::max) - next.iter().copied().fold(f64::INFINITY, f64::min);
    if fit_residual > opts.relative_tolerance * range.max(f64::MIN_POSITIVE) {
        return Err(Error::EstimationFailure(format!(
            "fit residual {fit_residual:.3e} exceeds {:.3e}",
            opts.relative_tolerance * range
        )));
    }

    let extrema = derivative_roots(&spline, domain, 40 * n_seg);
    if extrema.len() != 1 {
        return Err(Error::NotUnimodal { extrema });
    }
    let critical_point = extrema[0];
    if spline.derivative(critical_point, 2) == 0.0 {
        return Err(Error::NotUnimodal { extrema });
    }
    Ok(FittedMap {
        spline,
        domain,
        critical_point,
        fit_residual,
        ys,
        next,
    })
}

/// Interior roots of `s'`, located by sign changes on a uniform grid and then
/// bisection.
fn derivative_roots(s: &SmoothingSpline, (lo, hi): (f64, f64), grid: usize) -> Vec<f64> {
    let d = |y: f64| s.derivative(y, 1);
    let pts: Vec<f64> = (0..=grid).map(|i| lo + (hi - lo) * i as f64 / grid as f64).collect();
    let vals: Vec<f64> = pts.iter().map(|&y| d(y)).collect();
    let mut roots = Vec::new();
    for i in 0..grid {
        let (a, b) = (vals[i], vals[i + 1]);
        if i > 0 && a == 0.0 {
            if vals[i - 1] * b < 0.0 {
                roots.push(pts[i]);
            }
            continue;
        }
        if a * b < 0.0 {
            let (mut x0, mut x1, mut f0) = (pts[i], pts[i + 1], a);
            for _ in 0..200 {
                let m = 0.5 * (x0 + x1);
                if m <= x0 || m >= x1 {
                    break;
                }
                let fm = d(m);
                if fm == 0.0 {
                    x0 = m;
                    x1 = m;
                    break;
                }
                if (fm < 0.0) == (f0 < 0.0) {
                    x0 = m;
                    f0 = fm;
                } else {
                    x1 = m;
                }
            }
            roots.push(0.5 * (x0 + x1));
        }
    }
    roots
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    /// Nats per iterate, averaged over seed points.
    pub lambda: f64,
    /// Standard error from disjoint orbit segments (largest over seeds).
    pub stderr: f64,
    /// Largest minus smallest per-seed estimate.
    pub spread: f64,
    pub n_iterates: usize,
    pub burn_in: usize,
    pub seed_points: Vec<f64>,
    pub per_seed: Vec<f64>,
    /// Iterates that left the domain and were clipped back.
    pub clipped: usize,
    /// Orbits restarted after hitting the critical point.
    pub restarts: usize,
}

fn clip(map: &impl IntervalMap, v: f64, clipped: &mut usize) -> f64 {
    let (lo, hi) = map.domain();
    if v < lo || v > hi || v.is_nan() {
        *clipped += 1;
        if v.is_nan() {
            return 0.5 * (lo + hi);
        }
        return v.clamp(lo, hi);
    }
    v
}

/// Birkhoff average of `log |T'|` along the orbit of `y0` after `burn_in`
/// iterates.
pub fn lyapunov_exponent(map: &impl IntervalMap, y0: f64, n: usize, burn_in: usize) -> Result<LyapunovEstimate> {
    let (lo, hi) = map.domain();
    if !(y0 >= lo && y0 <= hi) {
        return Err(Error::Domain(format!("seed {y0} outside [{lo}, {hi}]")));
    }
    if n < LYAPUNOV_SEGMENTS {
        return Err(Error::InsufficientData(format!(
            "{n} iterates; at least {LYAPUNOV_SEGMENTS} needed"
        )));
    }
    let critical = map.critical_point();
    let mut clipped = 0;
    let mut restarts = 0;
    'restart: loop {
        // each restart nudges the seed by a fixed fraction of the domain
        let mut y = if restarts == 0 {
            y0
        } else {
            (y0 + restarts as f64 * 1e-7 * (hi - lo)).clamp(lo, hi)
        };
        let hits = |v: f64| critical.is_some_and(|c| (v - c).abs() <= CRITICAL_HIT_TOL);
        for _ in 0..burn_in {
            if hits(y) {
                restarts += 1;
                if restarts > MAX_RESTARTS {
                    break 'restart;
                }
                continue 'restart;
            }
            y = clip(map, map.value(y), &mut clipped);
        }
        let seg_len = n / LYAPUNOV_SEGMENTS;
        let mut seg_sums = vec![0.0; LYAPUNOV_SEGMENTS];
        let mut total = 0.0;
        for i in 0..n {
            if hits(y) {
                restarts += 1;
                if restarts > MAX_RESTARTS {
                    break 'restart;
                }
                continue 'restart;
            }
            let l = map.derivative(y).abs().ln();
            total += l;
            seg_sums[(i / seg_len).min(LYAPUNOV_SEGMENTS - 1)] += l;
            y = clip(map, map.value(y), &mut clipped);
        }
        let lambda = total / n as f64;
        let means: Vec<f64> = seg_sums
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let len = if k == LYAPUNOV_SEGMENTS - 1 {
                    n - seg_len * k
                } else {
                    seg_len
                };
                s / len as f64
            })
            .collect();
        let m = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (means.len() - 1) as f64;
        let stderr = (var / means.len() as f64).sqrt();
        return Ok(LyapunovEstimate {
            lambda,
            stderr,
            spread: 0.0,
            n_iterates: n,
            burn_in,
            seed_points: vec![y0],
            per_seed: vec![lambda],
            clipped,
            restarts,
        });
    }
    Err(Error::EstimationFailure(format!(
        "orbit of {y0} met the critical point more than {MAX_RESTARTS} times"
    )))
}

/// Runs [`lyapunov_exponent`] from several seeds and pools the results.
pub fn lyapunov_over_seeds(
    map: &impl IntervalMap,
    seeds: &[f64],
    n: usize,
    burn_in: usize,
) -> Result<LyapunovEstimate> {
    if seeds.is_empty() {
        return Err(Error::Validation("no seed points".into()));
    }
    let runs: Vec<LyapunovEstimate> = seeds
        .par_iter()
        .map(|&y| lyapunov_exponent(map, y, n, burn_in))
        .collect::<Result<_>>()?;
    let per_seed: Vec<f64> = runs.iter().map(|r| r.lambda).collect();
    let max = per_seed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = per_seed.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(LyapunovEstimate {
        lambda: per_seed.iter().sum::<f64>() / per_seed.len() as f64,
        stderr: runs.iter().map(|r| r.stderr).fold(0.0, f64::max),
        spread: max - min,
        n_iterates: n,
        burn_in,
        seed_points: seeds.to_vec(),
        per_seed,
        clipped: runs.iter().map(|r| r.clipped).sum(),
        restarts: runs.iter().map(|r| r.restarts).sum(),
    })
}

/// `T''' / T' - (3/2) (T'' / T')²`.
pub fn schwarzian_from_derivatives(d1: f64, d2: f64, d3: f64) -> f64 {
    d3 / d1 - 1.5 * (d2 / d1) * (d2 / d1)
}

/// `[T, T', T'', T''']` at `y` from a least-squares quartic through the
/// `window` samples nearest to `y`. `xs` must be sorted.
pub fn local_derivatives(xs: &[f64], ys: &[f64], y: f64, window: usize) -> Result<[f64; 4]> {
    if xs.len() != ys.len() {
        return Err(Error::Validation("sample lengths differ".into()));
    }
    if window < 5 || xs.len() < window {
        return Err(Error::InsufficientData(format!(
            "{} samples cannot fill a quartic window of {window}",
            xs.len()
        )));
    }
    // nearest `window` samples: grow outward from the insertion point
    let mut a = xs.partition_point(|&v| v < y);
    let mut b = a;
    while b - a < window {
        let take_left = match (a > 0, b < xs.len()) {
            (true, true) => (y - xs[a - 1]) <= (xs[b] - y),
            (l, _) => l,
        };
        if take_left {
            a -= 1;
        } else {
            b += 1;
        }
    }
    let scale = xs[a..b].iter().map(|v| (v - y).abs()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::InsufficientData("window samples coincide".into()));
    }
    let m = DMatrix::from_fn(window, 5, |i, j| ((xs[a + i] - y) / scale).powi(j as i32));
    let rhs = DVector::from_iterator(window, ys[a..b].iter().copied());
    let qr = m.qr();
    let qtb = qr.q().transpose() * rhs;
    let c = qr
        .r()
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::EstimationFailure("singular local quartic system".into()))?;
    Ok([
        c[0],
        c[1] / scale,
        2.0 * c[2] / (scale * scale),
        6.0 * c[3] / (scale * scale * scale),
    ])
}

/// Schwarzian derivative of sampled map data at `y` from a local quartic.
pub fn schwarzian_from_samples(xs: &[f64], ys: &[f64], y: f64, window: usize) -> Result<f64> {
    let [_, d1, d2, d3] = local_derivatives(xs, ys, y, window)?;
    Ok(schwarzian_from_derivatives(d1, d2, d3))
}

/// Schwarzian of a fitted map at `y`, using local quartic refits of the
/// section data rather than the spline's third derivative.
pub fn schwarzian(map: &FittedMap, y: f64) -> Result<f64> {
    let (lo, hi) = map.domain;
    if !(y >= lo && y <= hi) {
        return Err(Error::Domain(format!("{y} outside [{lo}, {hi}]")));
    }
    if (y - map.critical_point).abs() <= map.exclusion_radius() {
        return Err(Error::Domain(format!(
            "{y} is within {:.3e} of the critical point {}",
            map.exclusion_radius(),
            map.critical_point
        )));
    }
    schwarzian_from_samples(&map.ys, &map.next, y, LOCAL_WINDOW)
}

/// Schwarzian signs on `n` evenly spaced points of the domain, skipping the
/// critical zone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchwarzianScan {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub negative_fraction: f64,
}

pub fn schwarzian_scan(map: &FittedMap, n: usize) -> Result<SchwarzianScan> {
    let (lo, hi) = map.domain;
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for i in 0..n {
        let y = lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64;
        match schwarzian(map, y) {
            Ok(s) => {
                grid.push(y);
                values.push(s);
            }
            Err(Error::Domain(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if values.is_empty() {
        return Err(Error::EmptyResult("no admissible grid points".into()));
    }
    let negative_fraction = values.iter().filter(|s| **s < 0.0).count() as f64 / values.len() as f64;
    Ok(SchwarzianScan {
        grid,
        values,
        negative_fraction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttractorCase {
    /// Positive exponent: the attractor is a finite union of intervals
    /// carrying an absolutely continuous invariant measure.
    AbsolutelyContinuous,
    /// Orbits settle on a periodic cycle.
    FiniteCycle,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub critical_point: Option<f64>,
    pub lambda_sigmas: f64,
    pub period: Option<usize>,
    pub per_seed_lambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub lambda: f64,
    pub stderr: f64,
    pub case: AttractorCase,
    pub evidence: Evidence,
}

/// Smallest `p ≤ MAX_PERIOD` with `|T^p(y) - y|` below tolerance after
/// `burn_in` iterates, if any.
pub fn detect_period(map: &impl IntervalMap, y0: f64, burn_in: usize) -> Option<usize> {
    let (lo, hi) = map.domain();
    let tol = 1e-9 * (hi - lo);
    let mut clipped = 0;
    let mut y = y0;
    for _ in 0..burn_in {
        y = clip(map, map.value(y), &mut clipped);
    }
    let mut v = y;
    for p in 1..=MAX_PERIOD {
        v = clip(map, map.value(v), &mut clipped);
        if (v - y).abs() <= tol {
            return Some(p);
        }
    }
    None
}

/// Three-way decision: exponent above three standard errors gives the
/// absolutely continuous case; every seed orbit settling on a cycle gives a
/// finite cycle; anything else is left open.
pub fn classify(map: &impl IntervalMap, lyap: &LyapunovEstimate) -> Classification {
    let sigmas = if lyap.stderr > 0.0 {
        lyap.lambda / lyap.stderr
    } else if lyap.lambda > 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    let periods: Vec<Option<usize>> = lyap
        .seed_points
        .iter()
        .map(|&y| detect_period(map, y, lyap.burn_in.max(10_000)))
        .collect();
    let period = if periods.iter().all(Option::is_some) {
        periods.iter().flatten().copied().max()
    } else {
        None
    };
    let case = if lyap.lambda > 0.0 && sigmas > 3.0 {
        AttractorCase::AbsolutelyContinuous
    } else if period.is_some() {
        AttractorCase::FiniteCycle
    } else {
        AttractorCase::Inconclusive
    };
    Classification {
        lambda: lyap.lambda,
        stderr: lyap.stderr,
        case,
        evidence: Evidence {
            critical_point: map.critical_point(),
            lambda_sigmas: sigmas,
            period,
            per_seed_lambda: lyap.per_seed.clone(),
        },
    }
}

/// CSV `y,T,dT,S` on `n` evenly spaced points; `S` is empty inside the
/// critical zone.
pub fn write_map_csv(map: &FittedMap, n: usize, mut w: impl Write) -> Result<()> {
    writeln!(w, "y,T,dT,S")?;
    let (lo, hi) = map.domain;
    for i in 0..n {
        let y = lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64;
        let t = map.value(y);
        let d = map.derivative(y);
        match schwarzian(map, y) {
            Ok(s) => writeln!(w, "{y:.16e},{t:.16e},{d:.16e},{s:.16e}")?,
            Err(_) => writeln!(w, "{y:.16e},{t:.16e},{d:.16e},")?,
        }
    }
    Ok(())
}
