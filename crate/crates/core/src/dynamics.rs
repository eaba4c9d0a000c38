//! Vector fields (Rössler family, classical Lorenz) and a fixed-step RK4
//! integrator.
//!
//! Three Rössler variants are provided:
//!
//! * `rossler_original`: `(-y - z, x + a y, b + z (x - c))`.
//! * `rossler_shifted`: the same flow with the origin moved to the unstable
//!   fixed point `p = (ε, -ε/a, ε/a)`, `ε = (c - sqrt(c² - 4ab)) / 2`, giving
//!   `(-y - z, x + a y, (ε/a) x + z (x - c + ε))`.
//! * `rossler_tilde`: the shifted field with the `O(ε)` terms dropped,
//!   `(-y - z, x + a y, z (x - c))`. Note that `z = 0` is invariant for this
//!   field and its orbits escape to infinity once `z` has decayed, so it is
//!   useful for local analysis only; attractor-level work uses the shifted
//!   field.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Any coordinate above this magnitude aborts an integration.
pub const BLOWUP_THRESHOLD: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldId {
    RosslerOriginal,
    RosslerShifted,
    RosslerTilde,
    LorenzClassical,
}

impl FieldId {
    pub fn is_rossler(self) -> bool {
        !matches!(self, FieldId::LorenzClassical)
    }

    pub fn name(self) -> &'static str {
        match self {
            FieldId::RosslerOriginal => "rossler_original",
            FieldId::RosslerShifted => "rossler_shifted",
            FieldId::RosslerTilde => "rossler_tilde",
            FieldId::LorenzClassical => "lorenz_classical",
        }
    }
}

/// A parameterised three-dimensional vector field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub field_id: FieldId,
    pub params: BTreeMap<String, f64>,
}

impl FlowSpec {
    pub fn new(field_id: FieldId) -> Self {
        Self {
            field_id,
            params: BTreeMap::new(),
        }
    }

    pub fn rossler(field_id: FieldId, a: f64, b: f64, c: f64) -> Self {
        Self::new(field_id)
            .with_param("a", a)
            .with_param("b", b)
            .with_param("c", c)
    }

    /// Lorenz with the usual σ = 10, ρ = 28, β = 8/3.
    pub fn lorenz() -> Self {
        Self::new(FieldId::LorenzClassical)
            .with_param("sigma", 10.0)
            .with_param("rho", 28.0)
            .with_param("beta", 8.0 / 3.0)
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn dimension(&self) -> usize {
        3
    }

    fn param(&self, name: &str) -> Result<f64> {
        let v = *self
            .params
            .get(name)
            .ok_or_else(|| Error::MissingParameter(name.to_string()))?;
        if !v.is_finite() {
            return Err(Error::Config(format!("parameter `{name}` is not finite")));
        }
        Ok(v)
    }

    /// Validates the parameters and returns an evaluable field.
    pub fn resolve(&self) -> Result<Field> {
        match self.field_id {
            FieldId::LorenzClassical => Ok(Field::Lorenz {
                sigma: self.param("sigma")?,
                rho: self.param("rho")?,
                beta: self.param("beta")?,
            }),
            id => {
                let (a, b, c) = (self.param("a")?, self.param("b")?, self.param("c")?);
                if c <= 0.0 {
                    return Err(Error::Config(format!("Rössler parameter c must be > 0, got {c}")));
                }
                Ok(match id {
                    FieldId::RosslerOriginal => Field::RosslerOriginal { a, b, c },
                    FieldId::RosslerTilde => Field::RosslerTilde { a, c },
                    FieldId::RosslerShifted => {
                        if a == 0.0 {
                            return Err(Error::Config("the shifted Rössler field needs a ≠ 0".into()));
                        }
                        let eps = rossler_epsilon(a, b, c)?;
                        Field::RosslerShifted { a, c, eps }
                    }
                    FieldId::LorenzClassical => unreachable!(),
                })
            }
        }
    }
}

/// `ε = (c - sqrt(c² - 4ab)) / 2`, evaluated as `2ab / (c + sqrt(c² - 4ab))`
/// to avoid cancellation when `ab ≪ c²`.
pub fn rossler_epsilon(a: f64, b: f64, c: f64) -> Result<f64> {
    let disc = c * c - 4.0 * a * b;
    if disc < 0.0 {
        return Err(Error::Domain(format!(
            "c² - 4ab = {disc} < 0: the fixed point is complex"
        )));
    }
    let root = disc.sqrt();
    if c + root == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * a * b / (c + root))
}

/// A field with validated parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Field {
    RosslerOriginal { a: f64, b: f64, c: f64 },
    RosslerShifted { a: f64, c: f64, eps: f64 },
    RosslerTilde { a: f64, c: f64 },
    Lorenz { sigma: f64, rho: f64, beta: f64 },
}

impl Field {
    #[inline]
    pub fn eval(&self, s: &[f64; 3]) -> [f64; 3] {
        let [x, y, z] = *s;
        match *self {
            Field::RosslerOriginal { a, b, c } => [-y - z, x + a * y, b + z * (x - c)],
            Field::RosslerShifted { a, c, eps } => [-y - z, x + a * y, eps / a * x + z * (x - c + eps)],
            Field::RosslerTilde { a, c } => [-y - z, x + a * y, z * (x - c)],
            Field::Lorenz { sigma, rho, beta } => [sigma * (y - x), x * (rho - z) - y, x * y - beta * z],
        }
    }
}

/// Autonomous vector field on `R^dim`.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn eval_into(&self, x: &[f64], out: &mut [f64]);
}

impl VectorField for Field {
    fn dim(&self) -> usize {
        3
    }

    #[inline]
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.eval(&[x[0], x[1], x[2]]));
    }
}

/// Adapts a closure into a [`VectorField`]; handy for test flows.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// Evaluates the field selected by `spec` at `x`.
pub fn eval_field(spec: &FlowSpec, x: [f64; 3]) -> Result<[f64; 3]> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("state is not finite".into()));
    }
    Ok(spec.resolve()?.eval(&x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointReport {
    /// In original Rössler coordinates.
    pub location: [f64; 3],
    pub epsilon: f64,
}

/// The unstable fixed point `(ε, -ε/a, ε/a)` of the original Rössler field.
pub fn unstable_fixed_point(spec: &FlowSpec) -> Result<FixedPointReport> {
    if !spec.field_id.is_rossler() {
        return Err(Error::Config(
            "fixed point report is defined for the Rössler family".into(),
        ));
    }
    let a = spec.param("a")?;
    let b = spec.param("b")?;
    let c = spec.param("c")?;
    if c <= 0.0 {
        return Err(Error::Config(format!("Rössler parameter c must be > 0, got {c}")));
    }
    let epsilon = rossler_epsilon(a, b, c)?;
    let location = if a == 0.0 {
        [epsilon, 0.0, 0.0]
    } else {
        [epsilon, -epsilon / a, epsilon / a]
    };
    Ok(FixedPointReport { location, epsilon })
}

/// Reusable classical RK4 stepper for a given field.
pub struct Rk4<'f, F: ?Sized> {
    field: &'f F,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl<'f, F: VectorField + ?Sized> Rk4<'f, F> {
    pub fn new(field: &'f F) -> Self {
        let d = field.dim();
        Self {
            field,
            k1: vec![0.0; d],
            k2: vec![0.0; d],
            k3: vec![0.0; d],
            k4: vec![0.0; d],
            tmp: vec![0.0; d],
        }
    }

    pub fn field(&self) -> &'f F {
        self.field
    }

    /// Advances `x` in place by one step of size `h`.
    pub fn step(&mut self, x: &mut [f64], h: f64) {
        let d = x.len();
        self.field.eval_into(x, &mut self.k1);
        for i in 0..d {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        self.field.eval_into(&self.tmp, &mut self.k2);
        for i in 0..d {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        self.field.eval_into(&self.tmp, &mut self.k3);
        for i in 0..d {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        self.field.eval_into(&self.tmp, &mut self.k4);
        for i in 0..d {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }

    /// One step from `x` into `out`, leaving `x` untouched.
    pub fn step_from(&mut self, x: &[f64], h: f64, out: &mut [f64]) {
        out.copy_from_slice(x);
        self.step(out, h);
    }
}

pub(crate) fn out_of_bounds(x: &[f64]) -> bool {
    x.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP_THRESHOLD)
}

/// A fixed-step sample path; state `k` is at time `t0 + k h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub h: f64,
    dim: usize,
    data: Vec<f64>,
    pub label: String,
}

impl Trajectory {
    pub fn from_states(t0: f64, h: f64, dim: usize, data: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(Error::Validation("trajectory needs at least one full state".into()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::IntegrationBlowup { index: i / dim });
        }
        Ok(Self {
            t0,
            h,
            dim,
            data,
            label: label.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn state(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.h
    }

    /// `(len - 1) h`.
    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.h
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Componentwise (min, max).
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for s in self.states() {
            for d in 0..self.dim {
                lo[d] = lo[d].min(s[d]);
                hi[d] = hi[d].max(s[d]);
            }
        }
        (lo, hi)
    }

    /// Every `stride`-th state as a uniformly weighted point cloud.
    pub fn to_cloud(&self, stride: usize) -> Result<crate::cloud::PointCloud> {
        let stride = stride.max(1);
        let coords = self.states().step_by(stride).flatten().copied().collect();
        crate::cloud::PointCloud::uniform(self.dim, coords, self.label.clone())
    }

    /// CSV with header `t,x,y,z` (for three dimensions) and 17 significant
    /// digits per value.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{}", csv_header(self.dim))?;
        for (k, s) in self.states().enumerate() {
            write_csv_row(&mut w, self.time(k), s)?;
        }
        Ok(())
    }
}

pub fn csv_header(dim: usize) -> String {
    let names: Vec<String> = match dim {
        1 => vec!["x".into()],
        2 => vec!["x".into(), "y".into()],
        3 => vec!["x".into(), "y".into(), "z".into()],
        d => (0..d).map(|i| format!("x{i}")).collect(),
    };
    format!("t,{}", names.join(","))
}

pub fn write_csv_row(mut w: impl Write, t: f64, s: &[f64]) -> Result<()> {
    write!(w, "{t:.16e}")?;
    for v in s {
        write!(w, ",{v:.16e}")?;
    }
    writeln!(w)?;
    Ok(())
}

/// Integrates `field` from `x0` with `n` RK4 steps of size `h`, returning the
/// `n + 1` visited states.
pub fn integrate_rk4<F: VectorField + ?Sized>(field: &F, x0: &[f64], h: f64, n: usize) -> Result<Trajectory> {
    check_integration_args(field, x0, h, n)?;
    let d = x0.len();
    let mut data = Vec::with_capacity((n + 1) * d);
    data.extend_from_slice(x0);
    let mut rk = Rk4::new(field);
    let mut x = x0.to_vec();
    for k in 1..=n {
        rk.step(&mut x, h);
        if out_of_bounds(&x) {
            return Err(Error::IntegrationBlowup { index: k });
        }
        data.extend_from_slice(&x);
    }
    Trajectory::from_states(0.0, h, d, data, "")
}

/// Streams the states of an RK4 integration to `visit(k, x)` without storing
/// them. Returns the final state.
pub fn integrate_rk4_streaming<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    h: f64,
    n: usize,
    mut visit: impl FnMut(usize, &[f64]) -> Result<()>,
) -> Result<Vec<f64>> {
    check_integration_args(field, x0, h, n)?;
    let mut rk = Rk4::new(field);
    let mut x = x0.to_vec();
    visit(0, &x)?;
    for k in 1..=n {
        rk.step(&mut x, h);
        if out_of_bounds(&x) {
            return Err(Error::IntegrationBlowup { index: k });
        }
        visit(k, &x)?;
    }
    Ok(x)
}

fn check_integration_args<F: VectorField + ?Sized>(field: &F, x0: &[f64], h: f64, n: usize) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Validation(format!("step h must be positive, got {h}")));
    }
    if n == 0 {
        return Err(Error::Validation("step count must be at least 1".into()));
    }
    if x0.len() != field.dim() {
        return Err(Error::Validation(format!(
            "initial state has {} components, field has {}",
            x0.len(),
            field.dim()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("initial state is not finite".into()));
    }
    Ok(())
}

/// [`integrate_rk4`] for a [`FlowSpec`], tagging the trajectory with the field name.
pub fn integrate_flow(spec: &FlowSpec, x0: [f64; 3], h: f64, n: usize) -> Result<Trajectory> {
    let field = spec.resolve()?;
    let mut traj = integrate_rk4(&field, &x0, h, n)?;
    traj.label = spec.field_id.name().to_string();
    Ok(traj)
}

/// Drops the states before `t_skip` (measured from the trajectory start).
pub fn transient_skip(traj: &Trajectory, t_skip: f64) -> Result<Trajectory> {
    if !(t_skip >= 0.0) {
        return Err(Error::Validation(format!("t_skip must be ≥ 0, got {t_skip}")));
    }
    if t_skip >= traj.duration() {
        return Err(Error::EmptyResult(format!(
            "t_skip = {t_skip} is not below the duration {}",
            traj.duration()
        )));
    }
    let first = steps_for(t_skip, traj.h);
    let d = traj.dim;
    Trajectory::from_states(
        traj.t0 + first as f64 * traj.h,
        traj.h,
        d,
        traj.data[first * d..].to_vec(),
        traj.label.clone(),
    )
}

/// Number of steps of size `h` covering `t`, tolerating representation error
/// in `t / h`.
pub fn steps_for(t: f64, h: f64) -> usize {
    let ratio = t / h;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Seeded start near the relevant unstable fixed point: `p⁻` for the
/// original Rössler field, the origin for the recentred ones, `C⁺` for Lorenz.
pub fn default_initial_condition(spec: &FlowSpec, seed: u64) -> Result<[f64; 3]> {
    let field = spec.resolve()?;
    let base = match field {
        Field::RosslerOriginal { .. } => unstable_fixed_point(spec)?.location,
        Field::RosslerShifted { .. } | Field::RosslerTilde { .. } => [0.0; 3],
        Field::Lorenz { rho, beta, .. } => {
            let r = (beta * (rho - 1.0)).max(0.0).sqrt();
            [r, r, rho - 1.0]
        }
    };
    let mut rng = stream_rng(seed, 0);
    let mut x = base;
    for v in &mut x {
        *v += rng.gen_range(-0.5..0.5);
    }
    if let Field::RosslerTilde { .. } = field {
        // keep z off the invariant plane
        x[2] = x[2].abs().max(1e-3);
    }
    Ok(x)
}
