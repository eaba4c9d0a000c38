//! Generalized dimensions `D_q` and local dimensions from weighted point
//! clouds, via fixed-radius correlation integrals
//!
//! ```text
//! q ≠ 1:  log Σ_i w_i m_i(r)^(q-1)      ~ (q - 1) D_q log r
//! q = 1:  Σ_i w_i log m_i(r)            ~ D_1 log r
//! ```
//!
//! where `m_i(r)` is the weight of the closed ball `B_r(x_i)` restricted to
//! admissible samples (outside the Theiler window of `i`).

mod index;

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

pub use index::{brute_force_count, BallTallies, NeighborIndex};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Minimum R² for an accepted scaling window.
pub const MIN_R2: f64 = 0.98;
/// Fraction of empty centres above which a radius is dropped when `q ≤ 1`.
pub const MAX_EMPTY_FRACTION: f64 = 0.05;
pub const MIN_CLOUD_SIZE: usize = 100;
pub const MIN_FIT_RADII: usize = 5;
/// Default Theiler window for clouds sampled along one orbit.
pub const ORBIT_THEILER: usize = 20;

const CENTER_CHUNK: usize = 256;

/// Geometric radius grid, stored in decreasing order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusGrid {
    r_values: Vec<f64>,
}

impl RadiusGrid {
    /// `per_decade` radii per factor of ten from `r_max` down to `r_min`
    /// (both included).
    pub fn geometric(r_max: f64, r_min: f64, per_decade: usize) -> Result<Self> {
        if !(r_min > 0.0) || !(r_max > r_min) || !r_max.is_finite() {
            return Err(Error::Validation(format!(
                "radius range [{r_min}, {r_max}] is not a positive interval"
            )));
        }
        if r_max / r_min < 10.0 * (1.0 - 1e-12) {
            return Err(Error::Validation(format!(
                "radius range spans {:.3} decades; at least one is required",
                (r_max / r_min).log10()
            )));
        }
        let decades = (r_max / r_min).log10();
        let steps = ((decades * per_decade.max(1) as f64).round() as usize).max(1);
        let r_values = (0..=steps)
            .map(|k| r_max * (r_min / r_max).powf(k as f64 / steps as f64))
            .collect();
        Ok(Self { r_values })
    }

    /// `decades` decades below `r_max`.
    pub fn decades(r_max: f64, decades: f64, per_decade: usize) -> Result<Self> {
        Self::geometric(r_max, r_max * 10f64.powf(-decades), per_decade)
    }

    /// Default grid: 24 radii per decade over 2.5 decades below a tenth of
    /// the cloud's largest bounding-box side.
    pub fn for_cloud(cloud: &PointCloud) -> Result<Self> {
        let extent = cloud.extent();
        if !(extent > 0.0) {
            return Err(Error::Validation("cloud has zero extent; give an explicit grid".into()));
        }
        Self::decades(0.1 * extent, 2.5, 24)
    }

    /// Grid from `r_max` down to the smallest radius at which the median
    /// admissible neighbour count (over up to 1000 evenly spaced centres)
    /// reaches `min_count`. The plug-in `m^(q-1)` is biased at small counts
    /// (upward by roughly `(q-1)(q-2) / (2 count)` for large `q`), so
    /// finite samples need such a floor.
    pub fn count_floored(
        index: &NeighborIndex,
        r_max: f64,
        min_count: u64,
        theiler: usize,
        per_decade: usize,
    ) -> Result<Self> {
        let n = index.len();
        if n == 0 {
            return Err(Error::InsufficientData("empty cloud".into()));
        }
        // probe four decades below r_max on a fine grid (ascending)
        let probe: Vec<f64> = (0..=160)
            .rev()
            .map(|k| r_max * 10f64.powf(-(k as f64) / 40.0))
            .collect();
        let stride = n.div_ceil(1000);
        let centers: Vec<usize> = (0..n).step_by(stride).collect();
        let counts: Vec<Vec<u64>> = centers
            .par_iter()
            .map(|&i| {
                index
                    .tallies(index.sample(i), &probe, (theiler > 0).then_some((i, theiler)))
                    .counts
            })
            .collect();
        let median_at = |k: usize| {
            let mut v: Vec<u64> = counts.iter().map(|c| c[k]).collect();
            v.sort_unstable();
            v[v.len() / 2]
        };
        let k = (0..probe.len())
            .find(|&k| median_at(k) >= min_count)
            .ok_or_else(|| Error::InsufficientData(format!("median count never reaches {min_count}")))?;
        let r_min = probe[k];
        if r_max / r_min < 10.0 * (1.0 - 1e-12) {
            return Err(Error::InsufficientData(format!(
                "count floor {min_count} leaves only {:.2} decades below r_max = {r_max}",
                (r_max / r_min).log10()
            )));
        }
        Self::geometric(r_max, r_min, per_decade)
    }

    pub fn from_values(mut r_values: Vec<f64>) -> Result<Self> {
        r_values.sort_by(|a, b| b.total_cmp(a));
        let ok = r_values.len() >= 2
            && r_values.iter().all(|r| *r > 0.0 && r.is_finite())
            && r_values.windows(2).all(|w| w[0] > w[1]);
        if !ok {
            return Err(Error::Validation("radii must be distinct, positive and finite".into()));
        }
        if r_values[0] / r_values[r_values.len() - 1] < 10.0 * (1.0 - 1e-12) {
            return Err(Error::Validation("radius grid must span at least one decade".into()));
        }
        Ok(Self { r_values })
    }

    pub fn r_values(&self) -> &[f64] {
        &self.r_values
    }

    pub fn r_max(&self) -> f64 {
        self.r_values[0]
    }

    pub fn r_min(&self) -> f64 {
        *self.r_values.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.r_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_values.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            r_values: self.r_values.iter().map(|r| r * s).collect(),
        }
    }

    fn ascending(&self) -> Vec<f64> {
        self.r_values.iter().rev().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub r: f64,
    /// `NaN` when the radius was dropped.
    pub log_sum: f64,
    pub empty_count: u64,
    pub retained: bool,
}

/// Correlation sums of one order `q` over a radius grid (decreasing `r`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationCurve {
    pub q: f64,
    pub points: Vec<CurvePoint>,
    pub n_centers: usize,
    pub theiler: usize,
}

impl CorrelationCurve {
    pub fn retained(&self) -> impl Iterator<Item = &CurvePoint> {
        self.points.iter().filter(|p| p.retained)
    }

    pub fn dropped(&self) -> impl Iterator<Item = &CurvePoint> {
        self.points.iter().filter(|p| !p.retained)
    }

    /// Builds a curve from explicit `(r, log_sum)` values (all retained).
    pub fn from_values(q: f64, values: &[(f64, f64)]) -> Self {
        Self {
            q,
            points: values
                .iter()
                .map(|&(r, log_sum)| CurvePoint {
                    r,
                    log_sum,
                    empty_count: 0,
                    retained: true,
                })
                .collect(),
            n_centers: 0,
            theiler: 0,
        }
    }
}

/// Accumulated sums for a block of centres.
#[derive(Clone)]
struct Sums {
    /// `[q][k]`: Σ w m^(q-1) over non-empty centres (q ≠ 1) or Σ w log m
    /// (q = 1), with `w = 1` for uniform clouds.
    power: Vec<Vec<f64>>,
    nonempty_weight: Vec<f64>,
    empty: Vec<u64>,
}

impl Sums {
    fn new(nq: usize, nr: usize) -> Self {
        Self {
            power: vec![vec![0.0; nr]; nq],
            nonempty_weight: vec![0.0; nr],
            empty: vec![0; nr],
        }
    }

    fn add(&mut self, other: &Sums) {
        for (a, b) in self.power.iter_mut().zip(&other.power) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (x, y) in self.nonempty_weight.iter_mut().zip(&other.nonempty_weight) {
            *x += y;
        }
        for (x, y) in self.empty.iter_mut().zip(&other.empty) {
            *x += y;
        }
    }
}

fn is_one(q: f64) -> bool {
    (q - 1.0).abs() < 1e-12
}

/// Correlation curves for several orders in one pass over the centres.
///
/// Centres are processed in fixed-size chunks whose partial sums are combined
/// in chunk order, so results do not depend on the thread count.
pub fn correlation_curves(
    index: &NeighborIndex,
    qs: &[f64],
    grid: &RadiusGrid,
    theiler: usize,
) -> Result<Vec<CorrelationCurve>> {
    let n = index.len();
    if n < MIN_CLOUD_SIZE {
        return Err(Error::InsufficientData(format!(
            "cloud has {n} points; correlation sums need at least {MIN_CLOUD_SIZE}"
        )));
    }
    if qs.iter().any(|q| !q.is_finite()) {
        return Err(Error::Validation("q must be finite".into()));
    }
    let radii = grid.ascending();
    let nr = radii.len();
    let nq = qs.len();
    let exclude = |i: usize| (theiler > 0).then_some((i, theiler));
    // uniform weights are summed as counts and divided by n at the end, which
    // keeps e.g. a Dirac cloud's sums at exactly 1
    let uniform = index.is_uniform();
    let scale = if uniform { n as f64 } else { 1.0 };

    let chunks: Vec<Sums> = (0..n.div_ceil(CENTER_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut s = Sums::new(nq, nr);
            for i in c * CENTER_CHUNK..((c + 1) * CENTER_CHUNK).min(n) {
                let w = if uniform { 1.0 } else { index.sample_weight(i) };
                let t = index.tallies(index.sample(i), &radii, exclude(i));
                for k in 0..nr {
                    let m = t.masses[k];
                    if t.counts[k] == 0 {
                        s.empty[k] += 1;
                        continue;
                    }
                    s.nonempty_weight[k] += w;
                    let lm = m.ln();
                    for (qi, &q) in qs.iter().enumerate() {
                        s.power[qi][k] += if is_one(q) { w * lm } else { w * ((q - 1.0) * lm).exp() };
                    }
                }
            }
            s
        })
        .collect();
    let mut total = Sums::new(nq, nr);
    for c in &chunks {
        total.add(c);
    }

    let mut curves = Vec::with_capacity(nq);
    for (qi, &q) in qs.iter().enumerate() {
        let mut points = Vec::with_capacity(nr);
        for k in (0..nr).rev() {
            let empty = total.empty[k];
            let nonempty_w = total.nonempty_weight[k];
            let too_many_empty = q <= 1.0 && empty as f64 > MAX_EMPTY_FRACTION * n as f64;
            let (log_sum, retained) = if too_many_empty || nonempty_w <= 0.0 {
                (f64::NAN, false)
            } else if q > 1.0 && !is_one(q) {
                // empty balls contribute m^(q-1) = 0
                ((total.power[qi][k] / scale).ln(), true)
            } else if is_one(q) {
                (total.power[qi][k] / nonempty_w, true)
            } else {
                // q < 1: average over the non-empty centres only
                ((total.power[qi][k] / nonempty_w).ln(), true)
            };
            points.push(CurvePoint {
                r: radii[k],
                log_sum,
                empty_count: empty,
                retained: retained && log_sum.is_finite(),
            });
        }
        if points.iter().all(|p| !p.retained) {
            return Err(Error::EstimationFailure(format!(
                "q = {q}: every radius was dropped (empty balls)"
            )));
        }
        curves.push(CorrelationCurve {
            q,
            points,
            n_centers: n,
            theiler,
        });
    }
    Ok(curves)
}

/// Correlation curve of a single order `q`.
pub fn correlation_curve(index: &NeighborIndex, q: f64, grid: &RadiusGrid, theiler: usize) -> Result<CorrelationCurve> {
    Ok(correlation_curves(index, &[q], grid, theiler)?.remove(0))
}

/// Result of a scaling-range fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionFit {
    pub q: f64,
    pub dq: f64,
    pub slope_stderr: f64,
    pub r_fit_min: f64,
    pub r_fit_max: f64,
    pub fit_r2: f64,
    pub n_radii: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LineFit {
    slope: f64,
    stderr: f64,
    r2: f64,
}

/// Ordinary least squares through `(x, y)`. A constant `y` gives slope 0 and
/// R² = 1.
fn ols(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if syy <= 0.0 || y.iter().all(|v| *v == y[0]) {
        return LineFit {
            slope: 0.0,
            stderr: 0.0,
            r2: 1.0,
        };
    }
    let slope = sxy / sxx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - my - slope * (a - mx);
            e * e
        })
        .sum();
    let r2 = (1.0 - sse / syy).max(0.0);
    let stderr = if x.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    LineFit { slope, stderr, r2 }
}

/// Picks the widest contiguous window (at least `MIN_FIT_RADII` radii over at
/// least one decade) whose fit reaches R² ≥ `MIN_R2`; ties go to higher R².
fn best_window(r: &[f64], x: &[f64], y: &[f64]) -> Result<(usize, usize, LineFit)> {
    let n = r.len();
    let spans_decade = |a: usize, b: usize| {
        let (lo, hi) = if r[a] < r[b] { (r[a], r[b]) } else { (r[b], r[a]) };
        hi / lo >= 10.0 * (1.0 - 1e-9)
    };
    let mut best: Option<(usize, usize, LineFit)> = None;
    let mut best_r2 = f64::NEG_INFINITY;
    let mut any_window = false;
    for len in (MIN_FIT_RADII..=n).rev() {
        for a in 0..=n - len {
            let b = a + len - 1;
            if !spans_decade(a, b) {
                continue;
            }
            any_window = true;
            let fit = ols(&x[a..=b], &y[a..=b]);
            best_r2 = best_r2.max(fit.r2);
            if fit.r2 >= MIN_R2 && best.as_ref().map_or(true, |(_, _, f)| fit.r2 > f.r2) {
                best = Some((a, b, fit));
            }
        }
        if best.is_some() {
            break;
        }
    }
    if !any_window {
        return Err(Error::InsufficientData(format!(
            "{n} retained radii; need at least {MIN_FIT_RADII} spanning a decade"
        )));
    }
    best.ok_or(Error::ScalingRangeNotFound {
        best_r2,
        threshold: MIN_R2,
    })
}

/// Slope of `log_sum` against `(q - 1) log r` (or `log r` at `q = 1`) over the
/// auto-selected scaling window.
pub fn fit_dimension(curve: &CorrelationCurve) -> Result<DimensionFit> {
    let pts: Vec<&CurvePoint> = curve.retained().collect();
    let r: Vec<f64> = pts.iter().map(|p| p.r).collect();
    let factor = if is_one(curve.q) { 1.0 } else { curve.q - 1.0 };
    let x: Vec<f64> = r.iter().map(|v| factor * v.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.log_sum).collect();
    let (a, b, fit) = best_window(&r, &x, &y)?;
    Ok(DimensionFit {
        q: curve.q,
        dq: fit.slope,
        slope_stderr: fit.stderr,
        r_fit_min: r[a].min(r[b]),
        r_fit_max: r[a].max(r[b]),
        fit_r2: fit.r2,
        n_radii: b - a + 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumEntry {
    pub q: f64,
    pub fit: Option<DimensionFit>,
    /// Why the fit failed, when it did.
    pub failure: Option<String>,
    pub dropped_radii: usize,
}

impl SpectrumEntry {
    pub fn dq(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.dq)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionSpectrum {
    pub entries: Vec<SpectrumEntry>,
    pub curves: Vec<CorrelationCurve>,
}

impl DimensionSpectrum {
    pub fn get(&self, q: f64) -> Option<&SpectrumEntry> {
        self.entries.iter().find(|e| (e.q - q).abs() < 1e-12)
    }

    pub fn dq(&self, q: f64) -> Option<f64> {
        self.get(q).and_then(SpectrumEntry::dq)
    }

    /// Largest violation of `D_q` non-increasing in `q`, in units of the
    /// combined standard error (`≤ 2` is consistent with monotonicity).
    /// Pairs are all ordered pairs of successfully fitted entries.
    pub fn monotonicity_violation(&self) -> f64 {
        let fits: Vec<&DimensionFit> = {
            let mut v: Vec<&DimensionFit> = self.entries.iter().filter_map(|e| e.fit.as_ref()).collect();
            v.sort_by(|a, b| a.q.total_cmp(&b.q));
            v
        };
        let mut worst: f64 = 0.0;
        for i in 0..fits.len() {
            for j in i + 1..fits.len() {
                let rise = fits[j].dq - fits[i].dq;
                if rise > 0.0 {
                    let se = fits[i].slope_stderr + fits[j].slope_stderr;
                    worst = worst.max(if se > 0.0 { rise / se } else { f64::INFINITY });
                }
            }
        }
        worst
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.monotonicity_violation() <= slack
    }

    /// CSV `q,Dq,stderr,rmin,rmax,r2`; failed entries have empty fields.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "q,Dq,stderr,rmin,rmax,r2")?;
        for e in &self.entries {
            match &e.fit {
                Some(f) => writeln!(
                    w,
                    "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    e.q, f.dq, f.slope_stderr, f.r_fit_min, f.r_fit_max, f.fit_r2
                )?,
                None => writeln!(w, "{},,,,,", e.q)?,
            }
        }
        Ok(())
    }

    /// CSV `q,r,log_sum,empty_count`; dropped radii have an empty `log_sum`.
    pub fn write_curves_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "q,r,log_sum,empty_count")?;
        for c in &self.curves {
            for p in &c.points {
                if p.retained {
                    writeln!(w, "{},{:.16e},{:.16e},{}", c.q, p.r, p.log_sum, p.empty_count)?;
                } else {
                    writeln!(w, "{},{:.16e},,{}", c.q, p.r, p.empty_count)?;
                }
            }
        }
        Ok(())
    }
}

/// `D_q` for every `q` in `q_list`; per-order failures become flagged entries.
pub fn spectrum(index: &NeighborIndex, q_list: &[f64], grid: &RadiusGrid, theiler: usize) -> Result<DimensionSpectrum> {
    let n = index.len();
    if n < MIN_CLOUD_SIZE {
        return Err(Error::InsufficientData(format!(
            "cloud has {n} points; correlation sums need at least {MIN_CLOUD_SIZE}"
        )));
    }
    let mut entries = Vec::with_capacity(q_list.len());
    let mut curves = Vec::new();
    // computed together, but a q whose radii all drop must not sink the others
    let all = correlation_curves(index, q_list, grid, theiler);
    let per_q: Vec<Result<CorrelationCurve>> = match all {
        Ok(cs) => cs.into_iter().map(Ok).collect(),
        Err(_) => q_list
            .iter()
            .map(|&q| correlation_curve(index, q, grid, theiler))
            .collect(),
    };
    for (q, curve) in q_list.iter().zip(per_q) {
        match curve {
            Ok(c) => {
                let dropped = c.dropped().count();
                let (fit, failure) = match fit_dimension(&c) {
                    Ok(f) => (Some(f), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                entries.push(SpectrumEntry {
                    q: *q,
                    fit,
                    failure,
                    dropped_radii: dropped,
                });
                curves.push(c);
            }
            Err(e) => entries.push(SpectrumEntry {
                q: *q,
                fit: None,
                failure: Some(e.to_string()),
                dropped_radii: grid.len(),
            }),
        }
    }
    Ok(DimensionSpectrum { entries, curves })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalDimensionSample {
    pub center: Vec<f64>,
    pub d_est: f64,
    pub slope_stderr: f64,
    pub r_fit_min: f64,
    pub r_fit_max: f64,
    pub fit_r2: f64,
}

/// Local dimension at an arbitrary point: slope of `log m(r)` against `log r`.
pub fn local_dimension(index: &NeighborIndex, center: &[f64], grid: &RadiusGrid) -> Result<LocalDimensionSample> {
    local_dimension_impl(index, center, grid, None)
}

/// Local dimension at sample `i`, excluding samples within `theiler` of it.
pub fn local_dimension_at_sample(
    index: &NeighborIndex,
    i: usize,
    grid: &RadiusGrid,
    theiler: usize,
) -> Result<LocalDimensionSample> {
    if i >= index.len() {
        return Err(Error::Validation(format!("sample {i} out of range")));
    }
    let exclude = (theiler > 0).then_some((i, theiler));
    local_dimension_impl(index, index.sample(i), grid, exclude)
}

fn local_dimension_impl(
    index: &NeighborIndex,
    center: &[f64],
    grid: &RadiusGrid,
    exclude: Option<(usize, usize)>,
) -> Result<LocalDimensionSample> {
    if center.len() != index.dim() {
        return Err(Error::Validation("centre dimension mismatch".into()));
    }
    if !index.box_contains(center) {
        return Err(Error::Domain("centre lies outside the cloud's bounding box".into()));
    }
    let radii = grid.ascending();
    let t = index.tallies(center, &radii, exclude);
    let (r, y): (Vec<f64>, Vec<f64>) = radii
        .iter()
        .zip(&t.masses)
        .filter(|(_, m)| **m > 0.0)
        .map(|(r, m)| (*r, m.ln()))
        .unzip();
    if r.is_empty() {
        return Err(Error::EmptyResult("every ball around the centre is empty".into()));
    }
    let x: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let (a, b, fit) = best_window(&r, &x, &y)?;
    Ok(LocalDimensionSample {
        center: center.to_vec(),
        d_est: fit.slope.max(0.0),
        slope_stderr: fit.stderr,
        r_fit_min: r[a].min(r[b]),
        r_fit_max: r[a].max(r[b]),
        fit_r2: fit.r2,
    })
}

/// Local dimensions at many sample centres, in parallel, in input order.
pub fn local_dimensions_at_samples(
    index: &NeighborIndex,
    centers: &[usize],
    grid: &RadiusGrid,
    theiler: usize,
) -> Vec<Result<LocalDimensionSample>> {
    centers
        .par_iter()
        .map(|&i| local_dimension_at_sample(index, i, grid, theiler))
        .collect()
}
