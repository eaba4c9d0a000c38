//! Weighted point clouds: the empirical measures every estimator consumes.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weights {
    Uniform,
    Explicit(Vec<f64>),
}

/// A finite weighted sample in `R^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    weights: Weights,
    label: String,
}

/// On-disk JSON form of a cloud.
#[derive(Debug, Serialize, Deserialize)]
struct CloudDocument {
    dim: usize,
    points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default)]
    label: String,
}

impl PointCloud {
    /// Uniformly weighted cloud from row-major coordinates.
    pub fn uniform(dim: usize, coords: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        Self::new(dim, coords, Weights::Uniform, label)
    }

    pub fn new(dim: usize, coords: Vec<f64>, weights: Weights, label: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("cloud dimension must be positive".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::Validation(format!(
                "{} coordinates is not a multiple of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite coordinate in point {}", i / dim)));
        }
        let n = coords.len() / dim;
        if let Weights::Explicit(w) = &weights {
            if w.len() != n {
                return Err(Error::Validation(format!("{} weights for {n} points", w.len())));
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Validation("weights must be finite and nonnegative".into()));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(Error::Validation(format!("weights sum to {total}, expected 1")));
            }
        }
        Ok(Self {
            dim,
            coords,
            weights,
            label: label.into(),
        })
    }

    /// Builds a cloud from raw nonnegative weights, normalising them to sum 1.
    pub fn with_raw_weights(dim: usize, coords: Vec<f64>, raw: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Validation("weights must have a positive finite sum".into()));
        }
        let w = raw.into_iter().map(|v| v / total).collect();
        Self::new(dim, coords, Weights::Explicit(w), label)
    }

    pub fn from_points(points: &[Vec<f64>], label: impl Into<String>) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Validation("empty point list".into()))?;
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Validation("inconsistent point dimensions".into()));
        }
        Self::uniform(dim, points.concat(), label)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.weights, Weights::Uniform)
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Weights::Uniform => 1.0 / self.len() as f64,
            Weights::Explicit(w) => w[i],
        }
    }

    /// Per-point weights, materialised.
    pub fn weight_vec(&self) -> Vec<f64> {
        match &self.weights {
            Weights::Uniform => vec![1.0 / self.len() as f64; self.len()],
            Weights::Explicit(w) => w.clone(),
        }
    }

    /// Componentwise (min, max) over all points.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in self.points() {
            for d in 0..self.dim {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    /// Longest side of the bounding box.
    pub fn extent(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max)
    }

    pub fn contains_in_box(&self, x: &[f64]) -> bool {
        let (lo, hi) = self.bounding_box();
        x.len() == self.dim && x.iter().zip(lo.iter().zip(&hi)).all(|(v, (a, b))| v >= a && v <= b)
    }

    /// Keeps only the listed coordinates, in the given order.
    pub fn project(&self, axes: &[usize]) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|&a| a >= self.dim) {
            return Err(Error::Validation(format!(
                "projection axes {axes:?} invalid for dimension {}",
                self.dim
            )));
        }
        let coords = self.points().flat_map(|p| axes.iter().map(move |&a| p[a])).collect();
        Self::new(axes.len(), coords, self.weights.clone(), self.label.clone())
    }

    /// Multiplies every coordinate by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            coords: self.coords.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    /// Applies `f` to every point, keeping weights.
    pub fn map_points(&self, out_dim: usize, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut coords = Vec::with_capacity(self.len() * out_dim);
        for p in self.points() {
            let q = f(p);
            if q.len() != out_dim {
                return Err(Error::Validation("mapped point has the wrong dimension".into()));
            }
            coords.extend(q);
        }
        Self::new(out_dim, coords, self.weights.clone(), self.label.clone())
    }

    /// Reads a JSON cloud document `{dim, points, weights?, label}`.
    pub fn read_json(reader: impl Read) -> Result<Self> {
        let doc: CloudDocument = serde_json::from_reader(reader)?;
        let coords = doc.points.concat();
        if doc.points.iter().any(|p| p.len() != doc.dim) {
            return Err(Error::Validation("point length does not match `dim`".into()));
        }
        let weights = match doc.weights {
            Some(w) => Weights::Explicit(w),
            None => Weights::Uniform,
        };
        Self::new(doc.dim, coords, weights, doc.label)
    }

    pub fn write_json(&self, writer: impl Write) -> Result<()> {
        let doc = CloudDocument {
            dim: self.dim,
            points: self.points().map(<[f64]>::to_vec).collect(),
            weights: match &self.weights {
                Weights::Uniform => None,
                Weights::Explicit(w) => Some(w.clone()),
            },
            label: self.label.clone(),
        };
        serde_json::to_writer(writer, &doc)?;
        Ok(())
    }

    /// Reads a CSV cloud. Lines starting with `#` are ignored; the first
    /// remaining line is the header. A column named `weight` holds weights
    /// (normalised on read); every other column is a coordinate.
    pub fn read_csv(reader: impl Read, label: impl Into<String>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(csv_error)?.clone();
        let weight_col = header.iter().position(|h| h == "weight");
        let dim = header.len() - usize::from(weight_col.is_some());
        let mut coords = Vec::new();
        let mut raw_weights = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(csv_error)?;
            for (col, field) in record.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Validation(format!("row {}: cannot parse `{field}`", row + 1)))?;
                if Some(col) == weight_col {
                    raw_weights.push(v);
                } else {
                    coords.push(v);
                }
            }
        }
        if weight_col.is_some() {
            Self::with_raw_weights(dim, coords, raw_weights, label)
        } else {
            Self::uniform(dim, coords, label)
        }
    }

    /// Writes `x0,x1,...[,weight]` rows at full precision.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let mut header: Vec<String> = (0..self.dim).map(|d| format!("x{d}")).collect();
        let explicit = !self.is_uniform();
        if explicit {
            header.push("weight".into());
        }
        writeln!(w, "{}", header.join(","))?;
        for (i, p) in self.points().enumerate() {
            let mut fields: Vec<String> = p.iter().map(|v| format!("{v:.16e}")).collect();
            if explicit {
                fields.push(format!("{:.16e}", self.weight(i)));
            }
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Validation(format!("csv: {e}"))
}
