//! Finite-difference forms of the second-order thin-plate penalty.
//!
//! Derivatives use forward first differences and central second differences
//! on the midpoint grid. Only stencils that fit inside the grid are kept, so
//! the energy `h (|D2 x|^2 + 2c^2 |D1 x|^2 + c^4 |x|^2)` carries the free
//! boundary conditions `x'' = x''' = 0` implicitly.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};

use crate::error::{FofrError, Result};
use crate::grid::{Grid, Surface};

/// Smallest grid that supports the fourth-difference stencil with room for interior rows.
pub const MIN_PENALTY_GRID: usize = 9;

/// `(G-1) x G` forward first-difference matrix scaled by `1/h`.
pub fn first_difference(grid: &Grid) -> DMatrix<f64> {
    let g = grid.size();
    let inv_h = 1.0 / grid.weight();
    let mut d = DMatrix::zeros(g - 1, g);
    for i in 0..g - 1 {
        d[(i, i)] = -inv_h;
        d[(i, i + 1)] = inv_h;
    }
    d
}

/// `(G-2) x G` central second-difference matrix scaled by `1/h^2`.
pub fn second_difference(grid: &Grid) -> DMatrix<f64> {
    let g = grid.size();
    let inv_h2 = 1.0 / (grid.weight() * grid.weight());
    let mut d = DMatrix::zeros(g - 2, g);
    for i in 0..g - 2 {
        d[(i, i)] = inv_h2;
        d[(i, i + 1)] = -2.0 * inv_h2;
        d[(i, i + 2)] = inv_h2;
    }
    d
}

/// Frequency `(l-1) pi` of the `l`-th cosine basis function.
pub fn cosine_frequency(l: usize) -> f64 {
    (l as f64 - 1.0) * PI
}

/// Discretized operator `x'''' - 2 c^2 x'' + c^4 x` with `c = (l-1) pi`.
///
/// Returned as the symmetric matrix `D2'D2 + 2 c^2 D1'D1 + c^4 I`, whose
/// interior rows are the usual 5-point and 3-point stencils.
pub fn penalty_operator(l: usize, grid: &Grid) -> Result<DMatrix<f64>> {
    if l < 1 {
        return Err(FofrError::InvalidArgument("basis index starts at 1".into()));
    }
    let g = grid.size();
    if g < MIN_PENALTY_GRID {
        return Err(FofrError::GridTooCoarse {
            size: g,
            min: MIN_PENALTY_GRID,
        });
    }
    let d1 = first_difference(grid);
    let d2 = second_difference(grid);
    let c2 = cosine_frequency(l).powi(2);
    let mut op = d2.tr_mul(&d2) + d1.tr_mul(&d1) * (2.0 * c2);
    for i in 0..g {
        op[(i, i)] += c2 * c2;
    }
    let sym = (&op + op.transpose()) * 0.5;
    Ok(sym)
}

/// `∬ (β_ss^2 + 2 β_st^2 + β_tt^2)` by finite differences of the grid values.
pub fn thin_plate_penalty(surface: &Surface) -> Result<f64> {
    let grid = &surface.grid;
    if grid.size() < 3 {
        return Err(FofrError::GridTooCoarse {
            size: grid.size(),
            min: 3,
        });
    }
    let h = grid.weight();
    let d1 = first_difference(grid);
    let d2 = second_difference(grid);
    let b = &surface.values;
    let ss = &d2 * b;
    let tt = b * d2.transpose();
    let st = &d1 * b * d1.transpose();
    Ok(h * h * (ss.norm_squared() + 2.0 * st.norm_squared() + tt.norm_squared()))
}

/// `J(β, β)` in the discretization used by the eigensystem.
///
/// The surface is expanded in `t` over the `G` cosines, which are exactly
/// orthonormal under midpoint quadrature, and each coefficient curve
/// `β_l(s)` contributes `h β_lᵀ L_l β_l`. For `β = Σ b_{kl} x̂_{kl} ⊗ η_l`
/// this equals `Σ ρ̂_{kl} b_{kl}²`.
pub fn spectral_penalty(surface: &Surface) -> Result<f64> {
    let grid = &surface.grid;
    let g = grid.size();
    let h = grid.weight();
    let mut total = 0.0;
    for l in 1..=g {
        let c = cosine_frequency(l);
        let eta = DVector::from_iterator(
            g,
            grid.points().iter().map(|&t| if l == 1 { 1.0 } else { SQRT_2 * (c * t).cos() }),
        );
        let coef = &surface.values * eta * h;
        if coef.amax() == 0.0 {
            continue;
        }
        let op = penalty_operator(l, grid)?;
        total += h * coef.dot(&(&op * &coef));
    }
    Ok(total)
}
