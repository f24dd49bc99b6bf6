//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use fofr_core::sim::{Design, Dgp, DgpSpec, ErrorSetting, SimData};
use fofr_core::{empirical_covariance, solve_eigensystem, CovarianceEstimate, EigenSystem, Result};

/// A simulated DGP 1 dataset with `n` subjects on a `g`-point grid.
pub fn dataset(n: usize, g: usize, seed: u64) -> Result<(Design, SimData)> {
    let spec = DgpSpec {
        grid_size: g,
        ..DgpSpec::new(Dgp::One, n, ErrorSetting::I, seed)?
    };
    let design = Design::new(&spec)?;
    let data = design.generate(0)?;
    Ok((design, data))
}

pub fn covariance(data: &SimData) -> Result<CovarianceEstimate> {
    empirical_covariance(&data.x)
}

pub fn eigensystem(design: &Design, data: &SimData) -> Result<Arc<EigenSystem>> {
    Ok(Arc::new(solve_eigensystem(&covariance(data)?, design.spec.truncation(), &design.grid)?))
}
