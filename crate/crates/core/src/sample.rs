//! Functional samples and their empirical covariance.

use nalgebra::{DMatrix, DVector};

use crate::error::{FofrError, Result};
use crate::grid::{Curve, Grid};

/// `n` curves on a common grid, stored row-wise as an `n x G` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalSample {
    grid: Grid,
    data: DMatrix<f64>,
    mean: Curve,
}

impl FunctionalSample {
    /// Wrap data as-is. The stored mean is zero; use [`center_sample`] to center.
    pub fn new(grid: &Grid, data: DMatrix<f64>) -> Result<Self> {
        check_shape(grid, &data)?;
        Ok(FunctionalSample {
            grid: grid.clone(),
            mean: Curve::zeros(grid),
            data,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn mean(&self) -> &Curve {
        &self.mean
    }

    pub fn curve(&self, i: usize) -> Curve {
        Curve {
            grid: self.grid.clone(),
            values: self.data.row(i).transpose(),
        }
    }

    /// Largest absolute column sum of the data matrix.
    pub fn max_column_sum(&self) -> f64 {
        self.data
            .column_iter()
            .map(|c| c.sum().abs())
            .fold(0.0, f64::max)
    }

    pub fn is_centered(&self) -> bool {
        let scale = self.data.amax().max(1.0);
        self.max_column_sum() <= 1e-10 * self.n() as f64 * scale
    }

    /// Rows of the sample except `skip`, without re-centering.
    pub fn without_row(&self, skip: usize) -> FunctionalSample {
        let keep: Vec<usize> = (0..self.n()).filter(|&i| i != skip).collect();
        FunctionalSample {
            grid: self.grid.clone(),
            data: self.data.select_rows(keep.iter()),
            mean: self.mean.clone(),
        }
    }
}

fn check_shape(grid: &Grid, data: &DMatrix<f64>) -> Result<()> {
    if data.ncols() != grid.size() {
        return Err(FofrError::IncompatibleGrids {
            left: data.ncols(),
            right: grid.size(),
        });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(FofrError::InvalidArgument("sample has non-finite values".into()));
    }
    Ok(())
}

/// Subtract the column means from `raw` (one curve per row).
pub fn center_sample(raw: &DMatrix<f64>, grid: &Grid) -> Result<FunctionalSample> {
    check_shape(grid, raw)?;
    let n = raw.nrows();
    if n < 2 {
        return Err(FofrError::InsufficientSample { n, min: 2 });
    }
    let mean = DVector::from_iterator(raw.ncols(), raw.column_iter().map(|c| c.mean()));
    let mut data = raw.clone();
    for mut row in data.row_iter_mut() {
        row -= mean.transpose();
    }
    Ok(FunctionalSample {
        grid: grid.clone(),
        data,
        mean: Curve {
            grid: grid.clone(),
            values: mean,
        },
    })
}

/// Covariance function `C_X(s_i, s_j)` on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceEstimate {
    pub grid: Grid,
    pub matrix: DMatrix<f64>,
}

impl CovarianceEstimate {
    pub fn new(grid: &Grid, matrix: DMatrix<f64>) -> Result<Self> {
        let g = grid.size();
        if matrix.nrows() != g || matrix.ncols() != g {
            return Err(FofrError::IncompatibleGrids {
                left: matrix.nrows(),
                right: g,
            });
        }
        Ok(CovarianceEstimate {
            grid: grid.clone(),
            matrix,
        })
    }

    /// Multiply the covariance by `factor`.
    pub fn scaled(&self, factor: f64) -> CovarianceEstimate {
        CovarianceEstimate {
            grid: self.grid.clone(),
            matrix: &self.matrix * factor,
        }
    }
}

/// `(1/n) sum_m X_m(s_i) X_m(s_j)` for a centered sample.
pub fn empirical_covariance(x: &FunctionalSample) -> Result<CovarianceEstimate> {
    if !x.is_centered() {
        return Err(FofrError::MustCenterFirst {
            max_col_sum: x.max_column_sum(),
        });
    }
    let n = x.n() as f64;
    let mut matrix = x.data.transpose() * &x.data / n;
    // exact symmetry
    let sym = (&matrix + matrix.transpose()) * 0.5;
    matrix.copy_from(&sym);
    Ok(CovarianceEstimate {
        grid: x.grid.clone(),
        matrix,
    })
}
