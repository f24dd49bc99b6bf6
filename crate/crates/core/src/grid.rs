//! Discretized functions on `[0,1]` and `[0,1]^2`.
//!
//! Every integral in the crate uses the same midpoint rule: `G` points at
//! `t_j = (2j - 1) / (2G)`, each with weight `1/G`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FofrError, Result};

/// Midpoint grid on `[0,1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    size: usize,
    points: Vec<f64>,
    weight: f64,
}

/// Build the `G`-point midpoint grid.
pub fn make_grid(size: usize) -> Result<Grid> {
    if size < 2 {
        return Err(FofrError::InvalidArgument(format!(
            "grid needs at least 2 points, got {size}"
        )));
    }
    let g = size as f64;
    let points = (1..=size).map(|j| (2.0 * j as f64 - 1.0) / (2.0 * g)).collect();
    Ok(Grid {
        size,
        points,
        weight: 1.0 / g,
    })
}

impl Grid {
    pub fn new(size: usize) -> Result<Self> {
        make_grid(size)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Index of the grid point closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let idx = (t * self.size as f64).floor();
        (idx.max(0.0) as usize).min(self.size - 1)
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.size != other.size {
            return Err(FofrError::IncompatibleGrids {
                left: self.size,
                right: other.size,
            });
        }
        Ok(())
    }
}

/// A function on `[0,1]` sampled at the grid points.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub grid: Grid,
    pub values: DVector<f64>,
}

impl Curve {
    pub fn new(grid: Grid, values: DVector<f64>) -> Result<Self> {
        if values.len() != grid.size() {
            return Err(FofrError::InvalidArgument(format!(
                "curve has {} values on a {}-point grid",
                values.len(),
                grid.size()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FofrError::InvalidArgument("curve has non-finite values".into()));
        }
        Ok(Curve { grid, values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = DVector::from_iterator(grid.size(), grid.points().iter().map(|&t| f(t)));
        Curve {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Curve {
            grid: grid.clone(),
            values: DVector::zeros(grid.size()),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A function on `[0,1]^2`; row index is `s`, column index is `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Surface {
    pub grid: Grid,
    pub values: DMatrix<f64>,
}

impl Surface {
    pub fn new(grid: Grid, values: DMatrix<f64>) -> Result<Self> {
        let g = grid.size();
        if values.nrows() != g || values.ncols() != g {
            return Err(FofrError::InvalidArgument(format!(
                "surface is {}x{} on a {g}-point grid",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FofrError::InvalidArgument("surface has non-finite values".into()));
        }
        Ok(Surface { grid, values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let p = grid.points();
        let values = DMatrix::from_fn(grid.size(), grid.size(), |i, j| f(p[i], p[j]));
        Surface {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Surface {
            grid: grid.clone(),
            values: DMatrix::zeros(grid.size(), grid.size()),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn transpose(&self) -> Surface {
        Surface {
            grid: self.grid.clone(),
            values: self.values.transpose(),
        }
    }

    pub fn difference(&self, other: &Surface) -> Result<Surface> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Surface {
            grid: self.grid.clone(),
            values: &self.values - &other.values,
        })
    }
}

/// `<f, g>_{L^2}` by midpoint quadrature.
pub fn l2_inner(f: &Curve, g: &Curve) -> Result<f64> {
    f.grid.ensure_same(&g.grid)?;
    Ok(f.grid.weight() * f.values.dot(&g.values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    #[test]
    fn two_point_grid() {
        let g = make_grid(2).unwrap();
        assert_eq!(g.points(), &[0.25, 0.75]);
        assert_eq!(g.weight(), 0.5);
    }

    #[test]
    fn hundred_point_grid() {
        let g = make_grid(100).unwrap();
        assert_eq!(g.size(), 100);
        assert!((g.weight() - 0.01).abs() < 1e-15);
        assert!(g.points().windows(2).all(|w| w[0] < w[1]));
        let total: f64 = (0..g.size()).map(|_| g.weight()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((g.points()[0] - 0.005).abs() < 1e-15);
        assert!((g.points()[99] - 0.995).abs() < 1e-15);
    }

    #[test]
    fn grid_of_one_rejected() {
        assert!(matches!(make_grid(1), Err(FofrError::InvalidArgument(_))));
        assert!(make_grid(0).is_err());
    }

    #[test]
    fn inner_of_ones_is_one() {
        let g = make_grid(37).unwrap();
        let one = Curve::from_fn(&g, |_| 1.0);
        assert!((l2_inner(&one, &one).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosines_orthonormal() {
        let g = make_grid(200).unwrap();
        let f = Curve::from_fn(&g, |t| SQRT_2 * (PI * t).cos());
        let h = Curve::from_fn(&g, |t| SQRT_2 * (2.0 * PI * t).cos());
        assert!(l2_inner(&f, &h).unwrap().abs() < 1e-3);
        assert!((l2_inner(&f, &f).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn mismatched_grids() {
        let a = Curve::zeros(&make_grid(10).unwrap());
        let b = Curve::zeros(&make_grid(11).unwrap());
        assert!(matches!(
            l2_inner(&a, &b),
            Err(FofrError::IncompatibleGrids { left: 10, right: 11 })
        ));
    }

    #[test]
    fn curve_rejects_nan() {
        let g = make_grid(3).unwrap();
        assert!(Curve::new(g.clone(), DVector::from_vec(vec![0.0, f64::NAN, 1.0])).is_err());
        assert!(Curve::new(g, DVector::from_vec(vec![0.0, 1.0])).is_err());
    }
}
