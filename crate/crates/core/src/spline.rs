//! Penalised cubic regression splines with the penalty weight chosen by
//! generalised cross-validation.
//!
//! Uniform cubic B-spline basis on `[lo, hi]` with a third-order difference
//! penalty on the coefficients. The penalty's null space is the quadratic
//! polynomials, so data lying on a parabola are reproduced exactly for every
//! penalty weight.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SmoothingSpline {
    lo: f64,
    width: f64,
    n_seg: usize,
    coef: Vec<f64>,
    /// Selected penalty weight.
    pub lambda: f64,
    /// Effective degrees of freedom `tr(H)` at `lambda`.
    pub edf: f64,
    pub gcv: f64,
}

/// Uniform cubic B-spline weights at local coordinate `t` for derivative
/// `order` (with respect to `t`).
#[inline]
fn local_basis(t: f64, order: usize) -> [f64; 4] {
    let s = 1.0 - t;
    match order {
        0 => [
            s * s * s / 6.0,
            (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0,
            (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0,
            t * t * t / 6.0,
        ],
        1 => [
            -s * s / 2.0,
            (3.0 * t * t - 4.0 * t) / 2.0,
            (-3.0 * t * t + 2.0 * t + 1.0) / 2.0,
            t * t / 2.0,
        ],
        2 => [s, 3.0 * t - 2.0, -3.0 * t + 1.0, t],
        3 => [-1.0, 3.0, -3.0, 1.0],
        _ => [0.0; 4],
    }
}

impl SmoothingSpline {
    /// Fits `y ≈ s(x)` with `n_seg` uniform segments over the data range.
    pub fn fit_gcv(x: &[f64], y: &[f64], n_seg: usize) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Validation("x and y lengths differ".into()));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite spline data".into()));
        }
        let n = x.len();
        let n_seg = n_seg.max(1);
        let nb = n_seg + 3;
        if n < 4 {
            return Err(Error::InsufficientData(format!(
                "{n} points cannot support a cubic spline"
            )));
        }
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(Error::InsufficientData("x values do not span an interval".into()));
        }
        let mut spline = Self {
            lo,
            width: (hi - lo) / n_seg as f64,
            n_seg,
            coef: vec![0.0; nb],
            lambda: 0.0,
            edf: 0.0,
            gcv: f64::INFINITY,
        };

        let mut gram = DMatrix::<f64>::zeros(nb, nb);
        let mut rhs = DVector::<f64>::zeros(nb);
        let rows: Vec<(usize, [f64; 4])> = x.iter().map(|&v| spline.locate(v, 0)).collect();
        for ((j, b), &yi) in rows.iter().zip(y) {
            for p in 0..4 {
                rhs[j + p] += b[p] * yi;
                for q in 0..4 {
                    gram[(j + p, j + q)] += b[p] * b[q];
                }
            }
        }
        let mut diff = DMatrix::<f64>::zeros(nb.saturating_sub(3), nb);
        for r in 0..nb.saturating_sub(3) {
            diff[(r, r)] = -1.0;
            diff[(r, r + 1)] = 3.0;
            diff[(r, r + 2)] = -3.0;
            diff[(r, r + 3)] = 1.0;
        }
        let penalty = diff.transpose() * &diff;
        let scale = gram.trace() / penalty.trace().max(f64::MIN_POSITIVE);
        // keeps the system definite when some segments hold no data
        let ridge = 1e-13 * gram.trace() / nb as f64;

        let mut best: Option<(f64, f64, f64, DVector<f64>)> = None;
        for e in -40..=24 {
            let lambda = scale * 10f64.powf(e as f64 * 0.25);
            let mut a = &gram + &penalty * lambda;
            for i in 0..nb {
                a[(i, i)] += ridge;
            }
            let Some(chol) = a.cholesky() else { continue };
            let c = chol.solve(&rhs);
            let inv = chol.inverse();
            let edf = inv.component_mul(&gram).sum();
            let rss: f64 = rows
                .iter()
                .zip(y)
                .map(|((j, b), yi)| {
                    let fit: f64 = (0..4).map(|p| b[p] * c[j + p]).sum();
                    (yi - fit) * (yi - fit)
                })
                .sum();
            let dof = n as f64 - edf;
            if dof <= 0.0 {
                continue;
            }
            let gcv = n as f64 * rss / (dof * dof);
            if best.as_ref().map_or(true, |b| gcv < b.0) {
                best = Some((gcv, lambda, edf, c));
            }
        }
        let (gcv, lambda, edf, c) =
            best.ok_or_else(|| Error::EstimationFailure("spline normal equations are singular".into()))?;
        spline.coef = c.iter().copied().collect();
        spline.lambda = lambda;
        spline.edf = edf;
        spline.gcv = gcv;
        Ok(spline)
    }

    /// Segment index and basis weights (for derivative `order`, already
    /// scaled to `x` units).
    #[inline]
    fn locate(&self, x: f64, order: usize) -> (usize, [f64; 4]) {
        let u = (x - self.lo) / self.width;
        let j = (u.floor().max(0.0) as usize).min(self.n_seg - 1);
        let t = u - j as f64;
        let mut b = local_basis(t, order);
        let scale = self.width.powi(order as i32);
        for v in &mut b {
            *v /= scale;
        }
        (j, b)
    }

    pub fn derivative(&self, x: f64, order: usize) -> f64 {
        let (j, b) = self.locate(x, order);
        (0..4).map(|p| b[p] * self.coef[j + p]).sum()
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.lo + self.width * self.n_seg as f64)
    }
}

/// Default number of segments for `n` data points.
pub fn default_segments(n: usize) -> usize {
    (n / 10).clamp(8, 100)
}
