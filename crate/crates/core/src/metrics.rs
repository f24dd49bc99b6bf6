//! Estimation error summaries for a slope surface.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::Surface;
use crate::sample::CovarianceEstimate;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// Integrated squared error.
    pub ise: f64,
    /// Excess prediction risk, i.e. the squared V-norm of the error.
    pub epr: f64,
    /// Maximum absolute deviation on the grid.
    pub md: f64,
}

/// ISE, EPR and MD of `est` against `truth`.
pub fn metrics(est: &Surface, truth: &Surface, cov: &CovarianceEstimate) -> Result<ErrorMetrics> {
    est.grid.ensure_same(&truth.grid)?;
    est.grid.ensure_same(&cov.grid)?;
    let h = est.grid.weight();
    let delta = &est.values - &truth.values;
    let ise = h * h * delta.norm_squared();
    let epr = v_form(&delta, &delta, cov);
    let md = delta.amax();
    Ok(ErrorMetrics { ise, epr, md })
}

/// `V(a, b) = ∫∫∫ C(s1,s2) a(s1,t) b(s2,t)` with the surfaces given as raw `G x G` values.
pub fn v_form(
    a: &nalgebra::DMatrix<f64>,
    b: &nalgebra::DMatrix<f64>,
    cov: &CovarianceEstimate,
) -> f64 {
    let h = cov.grid.weight();
    let cb = &cov.matrix * b;
    h * h * h * a.component_mul(&cb).sum()
}
