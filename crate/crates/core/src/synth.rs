//! Synthetic measures with closed-form spectra, and samples of suspension
//! flows built over a base cloud.
//!
//! Samplers are pure functions of `(spec, seed)`. Work is split into chunks
//! of [`SAMPLE_CHUNK`] draws, chunk `c` using [`stream_rng`]`(seed, c)`, so the
//! output does not depend on the number of threads.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

pub const SAMPLE_CHUNK: usize = 4096;

fn chunked_draws<F>(n: usize, seed: u64, dim: usize, draw: F) -> Vec<f64>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng, &mut Vec<f64>) + Sync,
{
    let chunks: Vec<Vec<f64>> = (0..n.div_ceil(SAMPLE_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let count = SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK);
            let mut out = Vec::with_capacity(count * dim);
            for _ in 0..count {
                draw(&mut rng, &mut out);
            }
            out
        })
        .collect();
    chunks.concat()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    RightOfXk,
    LeftOfXk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Singularity {
    pub x: f64,
    pub alpha: f64,
    pub side: Side,
    pub psi: f64,
}

/// Density `ψ₀ + Σ ψ_k χ_k(x) |x - x_k|^(-α_k)` on `[lo, hi]` (normalised),
/// `χ_k` the indicator of the chosen side of `x_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingularDensitySpec {
    pub interval: [f64; 2],
    pub psi0: f64,
    #[serde(default)]
    pub singularities: Vec<Singularity>,
}

impl SingularDensitySpec {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        Self {
            interval: [lo, hi],
            psi0: 1.0,
            singularities: Vec::new(),
        }
    }

    pub fn with_singularity(mut self, x: f64, alpha: f64, side: Side, psi: f64) -> Self {
        self.singularities.push(Singularity { x, alpha, side, psi });
        self
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.interval;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Validation(format!("interval [{lo}, {hi}] is empty")));
        }
        if !(self.psi0 > 0.0 && self.psi0.is_finite()) {
            return Err(Error::Validation("psi0 must be positive".into()));
        }
        for (k, s) in self.singularities.iter().enumerate() {
            if !(s.alpha > 0.0 && s.alpha < 1.0) {
                return Err(Error::Validation(format!("singularity {k}: alpha must lie in (0, 1)")));
            }
            if !(s.psi > 0.0 && s.psi.is_finite()) {
                return Err(Error::Validation(format!("singularity {k}: psi must be positive")));
            }
            if !(s.x >= lo && s.x <= hi) {
                return Err(Error::Validation(format!("singularity {k}: x outside the interval")));
            }
            if self.reach(s) <= 0.0 {
                return Err(Error::Validation(format!(
                    "singularity {k}: no room on its side inside the interval"
                )));
            }
        }
        if self.singularities.windows(2).any(|w| w[1].alpha > w[0].alpha) {
            return Err(Error::Validation(
                "singularities must be sorted by non-increasing alpha".into(),
            ));
        }
        Ok(())
    }

    fn reach(&self, s: &Singularity) -> f64 {
        match s.side {
            Side::RightOfXk => self.interval[1] - s.x,
            Side::LeftOfXk => s.x - self.interval[0],
        }
    }

    /// Unnormalised integral of each mixture component, bounded part first.
    fn component_masses(&self) -> Vec<f64> {
        let [lo, hi] = self.interval;
        std::iter::once(self.psi0 * (hi - lo))
            .chain(
                self.singularities
                    .iter()
                    .map(|s| s.psi * self.reach(s).powf(1.0 - s.alpha) / (1.0 - s.alpha)),
            )
            .collect()
    }

    pub fn total_integral(&self) -> f64 {
        self.component_masses().iter().sum()
    }

    /// Largest singular exponent (0 without singularities).
    pub fn alpha(&self) -> f64 {
        self.singularities.iter().map(|s| s.alpha).fold(0.0, f64::max)
    }

    /// Normalised density at `x`.
    pub fn density(&self, x: f64) -> f64 {
        let [lo, hi] = self.interval;
        if x < lo || x > hi {
            return 0.0;
        }
        let mut rho = self.psi0;
        for s in &self.singularities {
            let on_side = match s.side {
                Side::RightOfXk => x > s.x,
                Side::LeftOfXk => x < s.x,
            };
            if on_side {
                rho += s.psi * (x - s.x).abs().powf(-s.alpha);
            }
        }
        rho / self.total_integral()
    }

    /// Closed-form cumulative distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        let [lo, hi] = self.interval;
        let x = x.clamp(lo, hi);
        let mut acc = self.psi0 * (x - lo);
        for s in &self.singularities {
            let e = 1.0 - s.alpha;
            acc += match s.side {
                Side::RightOfXk if x > s.x => s.psi * (x - s.x).powf(e) / e,
                Side::RightOfXk => 0.0,
                Side::LeftOfXk => {
                    let full = s.psi * (s.x - lo).powf(e) / e;
                    if x < s.x {
                        full - s.psi * (s.x - x).powf(e) / e
                    } else {
                        full
                    }
                }
            };
        }
        (acc / self.total_integral()).clamp(0.0, 1.0)
    }
}

/// Exact i.i.d. draws: pick a mixture component by its mass, then invert its
/// CDF in closed form.
pub fn sample_singular_density(spec: &SingularDensitySpec, n: usize, seed: u64) -> Result<PointCloud> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Validation("sample count must be positive".into()));
    }
    let masses = spec.component_masses();
    let total: f64 = masses.iter().sum();
    let cumulative: Vec<f64> = masses
        .iter()
        .scan(0.0, |acc, m| {
            *acc += m / total;
            Some(*acc)
        })
        .collect();
    let [lo, hi] = spec.interval;
    let coords = chunked_draws(n, seed, 1, |rng, out| {
        let v: f64 = rng.gen();
        let k = cumulative.partition_point(|c| *c <= v).min(masses.len() - 1);
        let u: f64 = rng.gen();
        let x = if k == 0 {
            lo + (hi - lo) * u
        } else {
            let s = &spec.singularities[k - 1];
            let offset = spec.reach(s) * u.powf(1.0 / (1.0 - s.alpha));
            match s.side {
                Side::RightOfXk => s.x + offset,
                Side::LeftOfXk => s.x - offset,
            }
        };
        out.push(x.clamp(lo, hi));
    });
    PointCloud::uniform(1, coords, format!("singular_density(alpha={})", spec.alpha()))
}

/// `D_q` of the singular density: `1` below `q = 1/α`, `q(1-α)/(q-1)` above.
pub fn analytic_dq_singular(spec: &SingularDensitySpec, q: f64) -> f64 {
    singular_dq(spec.alpha(), q)
}

fn singular_dq(alpha: f64, q: f64) -> f64 {
    if alpha <= 0.0 || q * alpha < 1.0 {
        1.0
    } else {
        q * (1.0 - alpha) / (q - 1.0)
    }
}

/// `D_q` of the flow measure whose section carries a singular density of
/// exponent `alpha`: one more than the section value.
pub fn analytic_dq_flow_formula(alpha: f64, q: f64) -> f64 {
    1.0 + singular_dq(alpha, q)
}

/// Binomial multiplicative cascade on `[0, 1]`: the left half of every dyadic
/// cell receives fraction `p` of its mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeSpec {
    pub p: f64,
    pub depth: u32,
    pub n_samples: usize,
    pub seed: u64,
}

impl CascadeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Validation(format!(
                "cascade weight p = {} is outside (0, 1)",
                self.p
            )));
        }
        if self.depth == 0 || self.depth > 52 {
            return Err(Error::Validation(format!(
                "cascade depth {} is outside 1..=52",
                self.depth
            )));
        }
        if self.n_samples == 0 {
            return Err(Error::Validation("sample count must be positive".into()));
        }
        Ok(())
    }
}

pub fn sample_cascade(spec: &CascadeSpec) -> Result<PointCloud> {
    spec.validate()?;
    let depth = spec.depth;
    let p = spec.p;
    let coords = chunked_draws(spec.n_samples, spec.seed, 1, |rng, out| {
        let mut cell: u64 = 0;
        for _ in 0..depth {
            cell = (cell << 1) | u64::from(rng.gen::<f64>() >= p);
        }
        let u: f64 = rng.gen();
        out.push((cell as f64 + u) / (1u64 << depth) as f64);
    });
    PointCloud::uniform(1, coords, format!("cascade(p={p},depth={depth})"))
}

/// `log₂(p^q + (1-p)^q) / (1 - q)`, and the binary entropy at `q = 1`.
pub fn analytic_dq_cascade(p: f64, q: f64) -> f64 {
    if (q - 1.0).abs() < 1e-12 {
        -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
    } else {
        (p.powf(q) + (1.0 - p).powf(q)).log2() / (1.0 - q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Roof {
    Constant(f64),
    /// One return time per base point.
    PerPoint(Vec<f64>),
}

impl Roof {
    /// Roof values `f(ξ)` over a base cloud.
    pub fn from_fn(base: &PointCloud, f: impl Fn(&[f64]) -> f64) -> Self {
        Roof::PerPoint(base.points().map(f).collect())
    }

    fn at(&self, i: usize) -> f64 {
        match self {
            Roof::Constant(t) => *t,
            Roof::PerPoint(v) => v[i],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuspensionSampleSpec {
    pub base_cloud: PointCloud,
    pub roof: Roof,
    pub n_samples: usize,
    pub seed: u64,
}

impl SuspensionSampleSpec {
    /// Largest `κ` with `κ ≤ τ ≤ 1/κ` for every roof value.
    pub fn kappa(&self) -> f64 {
        let (lo, hi) = match &self.roof {
            Roof::Constant(t) => (*t, *t),
            Roof::PerPoint(v) => v
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(*t), b.max(*t))),
        };
        lo.min(1.0 / hi)
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_cloud.is_empty() {
            return Err(Error::Validation("base cloud is empty".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::Validation("sample count must be positive".into()));
        }
        match &self.roof {
            Roof::Constant(t) if !(*t > 0.0 && t.is_finite()) => {
                return Err(Error::Validation(format!("roof {t} must be positive")))
            }
            Roof::PerPoint(v) if v.len() != self.base_cloud.len() => {
                return Err(Error::Validation(format!(
                    "{} roof values for {} base points",
                    v.len(),
                    self.base_cloud.len()
                )))
            }
            Roof::PerPoint(v) if v.iter().any(|t| !(*t > 0.0 && t.is_finite())) => {
                return Err(Error::Validation("roof values must be positive and finite".into()))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Samples the suspension measure: base index `i` with probability
/// `w_i τ_i / Σ w_j τ_j`, then height `u` uniform on `[0, τ_i)`. Output points
/// are `(ξ_i, u)`.
pub fn build_suspension_cloud(spec: &SuspensionSampleSpec) -> Result<PointCloud> {
    spec.validate()?;
    let base = &spec.base_cloud;
    let mut cumulative = Vec::with_capacity(base.len());
    let mut acc = 0.0;
    for i in 0..base.len() {
        acc += base.weight(i) * spec.roof.at(i);
        cumulative.push(acc);
    }
    let total = acc;
    let d = base.dim();
    let coords = chunked_draws(spec.n_samples, spec.seed, d + 1, |rng, out| {
        let v = rng.gen::<f64>() * total;
        let i = cumulative.partition_point(|c| *c <= v).min(base.len() - 1);
        out.extend_from_slice(base.point(i));
        out.push(spec.roof.at(i) * rng.gen::<f64>());
    });
    PointCloud::uniform(d + 1, coords, format!("suspension({})", base.label()))
}

const SHEAR_BASE: f64 = 0.2;
const SHEAR_CROSS: f64 = 0.5;

/// Smooth invertible maps used to push clouds forward.
///
/// `SmoothShear` sends `x` to `y` with `y₀ = x₀ + 0.2 sin(2x₀)` and
/// `y_k = x_k + 0.5 sin(2x_{k-1})`; its Jacobian is triangular with diagonal
/// in `[0.6, 1.4]`, so it is bi-Lipschitz on bounded sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diffeo {
    Identity,
    SmoothShear,
}

impl Diffeo {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Diffeo::Identity => x.to_vec(),
            Diffeo::SmoothShear => {
                let mut y = x.to_vec();
                y[0] = x[0] + SHEAR_BASE * (2.0 * x[0]).sin();
                for k in 1..x.len() {
                    y[k] = x[k] + SHEAR_CROSS * (2.0 * x[k - 1]).sin();
                }
                y
            }
        }
    }

    pub fn inverse(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Diffeo::Identity => y.to_vec(),
            Diffeo::SmoothShear => {
                let mut x = y.to_vec();
                // x + 0.2 sin 2x is strictly increasing; Newton from x = y converges
                let mut t = y[0];
                for _ in 0..50 {
                    let g = t + SHEAR_BASE * (2.0 * t).sin() - y[0];
                    let step = g / (1.0 + 2.0 * SHEAR_BASE * (2.0 * t).cos());
                    t -= step;
                    if step.abs() <= 1e-16 * (1.0 + t.abs()) {
                        break;
                    }
                }
                x[0] = t;
                for k in 1..y.len() {
                    x[k] = y[k] - SHEAR_CROSS * (2.0 * x[k - 1]).sin();
                }
                x
            }
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Diffeo::Identity => "identity",
            Diffeo::SmoothShear => "smooth_shear",
        }
    }
}

/// Push-forward of `cloud` under `mode`; weights are carried along and the
/// label records the map.
pub fn embed_diffeo(cloud: &PointCloud, mode: Diffeo) -> Result<PointCloud> {
    if mode == Diffeo::Identity {
        return Ok(cloud.clone());
    }
    let mut out = cloud.map_points(cloud.dim(), |p| mode.apply(p))?;
    out.set_label(format!("{}({})", mode.name(), cloud.label()));
    Ok(out)
}

/// Graph cloud `{(x, φ(x))}` over a one-dimensional cloud.
pub fn graph_cloud(cloud: &PointCloud, phi: impl Fn(f64) -> f64) -> Result<PointCloud> {
    if cloud.dim() != 1 {
        return Err(Error::Validation("graph clouds need a one-dimensional base".into()));
    }
    let mut out = cloud.map_points(2, |p| vec![p[0], phi(p[0])])?;
    out.set_label(format!("graph({})", cloud.label()));
    Ok(out)
}

/// Kolmogorov–Smirnov statistic of a one-dimensional sample against `cdf`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
