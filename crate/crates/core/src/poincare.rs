//! Section crossings, first-return maps and roof (return-time) functions.
//!
//! The section is the hyperplane `{x_i = level}` crossed in a fixed
//! direction. Crossing times are refined by bisection on the length of a
//! single RK4 sub-step started from the state before the crossing, so the
//! refined point lies on the discrete flow itself rather than on a chord.

use std::io::Write;

use serde::Serialize;

use crate::dynamics::{out_of_bounds, Rk4, Trajectory, VectorField};
use crate::error::{Error, Result};
use crate::spline::{default_segments, SmoothingSpline};

pub const REFINE_TOL: f64 = 1e-10;
pub const REFINE_MAX_ITER: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SectionSpec {
    pub coordinate_index: usize,
    pub level: f64,
    pub direction: Direction,
}

impl SectionSpec {
    /// `{x = 0, ẋ > 0}`.
    pub fn x_zero_increasing() -> Self {
        Self {
            coordinate_index: 0,
            level: 0.0,
            direction: Direction::Increasing,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.coordinate_index >= dim {
            return Err(Error::Validation(format!(
                "section coordinate {} out of range for dimension {dim}",
                self.coordinate_index
            )));
        }
        if !self.level.is_finite() {
            return Err(Error::Validation("section level is not finite".into()));
        }
        Ok(())
    }

    /// Drops the sectioned coordinate; for index 0 in three dimensions this
    /// gives `(y, z)`.
    pub fn section_coords(&self, state: &[f64]) -> Vec<f64> {
        state
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.coordinate_index)
            .map(|(_, v)| *v)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossing {
    pub time: f64,
    /// Section coordinates (the state without the sectioned component).
    pub point: Vec<f64>,
    /// Sectioned coordinate minus the level at the refined point.
    pub refine_residual: f64,
}

/// Incremental crossing detector fed with consecutive states of a
/// fixed-step RK4 orbit.
pub struct CrossingDetector<'f, F: ?Sized> {
    rk: Rk4<'f, F>,
    sec: SectionSpec,
    h: f64,
    tol: f64,
    prev: Option<(usize, f64, Vec<f64>)>,
    last_change: Option<usize>,
    scratch: Vec<f64>,
    deriv: Vec<f64>,
}

impl<'f, F: VectorField + ?Sized> CrossingDetector<'f, F> {
    pub fn new(field: &'f F, sec: SectionSpec, h: f64) -> Result<Self> {
        sec.validate(field.dim())?;
        if !(h > 0.0) {
            return Err(Error::Validation(format!("step h must be positive, got {h}")));
        }
        Ok(Self {
            rk: Rk4::new(field),
            sec,
            h,
            tol: REFINE_TOL,
            prev: None,
            last_change: None,
            scratch: vec![0.0; field.dim()],
            deriv: vec![0.0; field.dim()],
        })
    }

    /// Overrides the refinement tolerance on the residual.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    fn offset(&self, x: &[f64]) -> f64 {
        x[self.sec.coordinate_index] - self.sec.level
    }

    /// Feeds state `index` at time `t`. Returns a crossing when the segment
    /// from the previous state crosses the section in the requested direction.
    pub fn push(&mut self, index: usize, t: f64, x: &[f64]) -> Result<Option<Crossing>> {
        let g1 = self.offset(x);
        let Some((_, t0, x0)) = self.prev.take() else {
            self.prev = Some((index, t, x.to_vec()));
            return Ok(None);
        };
        let g0 = self.offset(&x0);
        let up = g0 < 0.0 && g1 >= 0.0;
        let down = g0 >= 0.0 && g1 < 0.0;
        let mut found = None;
        if up || down {
            if self.last_change == Some(index - 1) {
                return Err(Error::StepTooLarge { index, h: self.h });
            }
            self.last_change = Some(index);
            let wanted = match self.sec.direction {
                Direction::Increasing => up,
                Direction::Decreasing => down,
            };
            if wanted {
                found = self.refine(t0, &x0, g0)?;
            }
        }
        self.prev = Some((index, t, x.to_vec()));
        Ok(found)
    }

    fn refine(&mut self, t0: f64, x0: &[f64], g0: f64) -> Result<Option<Crossing>> {
        let (mut lo, mut hi) = (0.0, self.h);
        let increasing = g0 < 0.0;
        let mut tau = hi;
        let mut residual = f64::NAN;
        for _ in 0..REFINE_MAX_ITER {
            tau = 0.5 * (lo + hi);
            self.rk.step_from(x0, tau, &mut self.scratch);
            residual = self.offset(&self.scratch);
            if residual.abs() <= self.tol {
                break;
            }
            if (residual < 0.0) == increasing {
                lo = tau;
            } else {
                hi = tau;
            }
        }
        if out_of_bounds(&self.scratch) {
            return Err(Error::IntegrationBlowup { index: 0 });
        }
        // direction from the field itself, not from differencing
        self.rk.field().eval_into(&self.scratch, &mut self.deriv);
        let rate = self.deriv[self.sec.coordinate_index];
        let ok = match self.sec.direction {
            Direction::Increasing => rate > 0.0,
            Direction::Decreasing => rate < 0.0,
        };
        if !ok {
            return Ok(None);
        }
        Ok(Some(Crossing {
            time: t0 + tau,
            point: self.sec.section_coords(&self.scratch),
            refine_residual: residual,
        }))
    }
}

/// All crossings of `sec` along a stored trajectory of `field`.
pub fn detect_crossings<F: VectorField + ?Sized>(
    traj: &Trajectory,
    field: &F,
    sec: SectionSpec,
) -> Result<Vec<Crossing>> {
    if traj.dim() != field.dim() {
        return Err(Error::Validation("trajectory and field dimensions differ".into()));
    }
    let mut det = CrossingDetector::new(field, sec, traj.h)?;
    let mut out = Vec::new();
    for (k, s) in traj.states().enumerate() {
        if let Some(c) = det.push(k, traj.time(k), s)? {
            out.push(c);
        }
    }
    Ok(out)
}

/// Integrates `field` for `n` steps from `x0` and collects section crossings
/// after `skip` steps, without storing the orbit.
pub fn collect_crossings<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    h: f64,
    n: usize,
    skip: usize,
    sec: SectionSpec,
) -> Result<Vec<Crossing>> {
    let mut det = CrossingDetector::new(field, sec, h)?;
    let mut out = Vec::new();
    crate::dynamics::integrate_rk4_streaming(field, x0, h, n, |k, x| {
        if k >= skip {
            if let Some(c) = det.push(k, k as f64 * h, x)? {
                out.push(c);
            }
        }
        Ok(())
    })?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnPair {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    /// Return time.
    pub tau: f64,
}

/// Consecutive crossings as samples of the return map `R` and roof `𝔱`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnMapData {
    pub crossings: Vec<Crossing>,
    pub pairs: Vec<ReturnPair>,
    pub h_used: f64,
}

impl ReturnMapData {
    /// Smallest return time: the empirical lower bound of the roof.
    pub fn kappa(&self) -> f64 {
        self.pairs.iter().map(|p| p.tau).fold(f64::INFINITY, f64::min)
    }

    /// `(ξ_i[axis], ξ_{i+1}[axis])` pairs, the input of a 1-D map fit.
    pub fn coordinate_pairs(&self, axis: usize) -> Vec<(f64, f64)> {
        self.pairs.iter().map(|p| (p.from[axis], p.to[axis])).collect()
    }

    /// CSV `u_i,v_i,u_next,v_next,tau` (two section coordinates).
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "u_i,v_i,u_next,v_next,tau")?;
        for p in &self.pairs {
            let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(f64::NAN);
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                get(&p.from, 0),
                get(&p.from, 1),
                get(&p.to, 0),
                get(&p.to, 1),
                p.tau
            )?;
        }
        Ok(())
    }
}

/// CSV `t,u,v,residual`.
pub fn write_crossings_csv(crossings: &[Crossing], mut w: impl Write) -> Result<()> {
    writeln!(w, "t,u,v,residual")?;
    for c in crossings {
        let u = c.point.first().copied().unwrap_or(f64::NAN);
        let v = c.point.get(1).copied().unwrap_or(f64::NAN);
        writeln!(w, "{:.16e},{u:.16e},{v:.16e},{:.16e}", c.time, c.refine_residual)?;
    }
    Ok(())
}

pub fn build_return_map(crossings: Vec<Crossing>, h_used: f64) -> Result<ReturnMapData> {
    if crossings.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} crossing(s); a return map needs at least 2",
            crossings.len()
        )));
    }
    let pairs = crossings
        .windows(2)
        .map(|w| ReturnPair {
            from: w[0].point.clone(),
            to: w[1].point.clone(),
            tau: w[1].time - w[0].time,
        })
        .collect();
    Ok(ReturnMapData {
        crossings,
        pairs,
        h_used,
    })
}

/// Largest deviation of the second section coordinate from a smooth fit
/// `v = φ(u)` through all crossings.
pub fn section_thickness(data: &ReturnMapData) -> Result<f64> {
    if data.pairs.is_empty() {
        return Err(Error::InsufficientData("no return pairs".into()));
    }
    let pts: Vec<(f64, f64)> = data
        .crossings
        .iter()
        .filter(|c| c.point.len() >= 2)
        .map(|c| (c.point[0], c.point[1]))
        .collect();
    let mut us: Vec<f64> = pts.iter().map(|p| p.0).collect();
    us.sort_by(f64::total_cmp);
    us.dedup();
    // a cubic through at most four abscissae interpolates exactly
    if us.len() <= 4 {
        return Ok(0.0);
    }
    let (u, v): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let spline = SmoothingSpline::fit_gcv(&u, &v, default_segments(u.len()))?;
    Ok(u.iter()
        .zip(&v)
        .map(|(a, b)| (b - spline.value(*a)).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoofStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

pub fn roof_statistics(data: &ReturnMapData) -> Result<RoofStats> {
    if data.pairs.is_empty() {
        return Err(Error::InsufficientData("no return pairs".into()));
    }
    let taus = data.pairs.iter().map(|p| p.tau);
    Ok(RoofStats {
        min: taus.clone().fold(f64::INFINITY, f64::min),
        max: taus.clone().fold(f64::NEG_INFINITY, f64::max),
        mean: taus.sum::<f64>() / data.pairs.len() as f64,
    })
}
