//! Generalized dimensions of flows and their Poincaré sections: integrators,
//! section detection, correlation-sum estimators, synthetic measures with
//! known spectra, and one-dimensional return-map diagnostics.

pub mod cloud;
pub mod dynamics;
pub mod error;
pub mod mfa;
pub mod poincare;
pub mod rng;
pub mod spline;
pub mod synth;
pub mod unimodal;

pub use cloud::{PointCloud, Weights};
pub use error::{Error, Result};
