//! Empirical simultaneous-diagonalization basis `x̂_{kl} ⊗ η_l`.
//!
//! For each response frequency `l` the functions `x̂_{kl}` solve the
//! discretized generalized eigenproblem `L_l x = ρ (h Ĉ_X) x`, where `L_l`
//! comes from [`penalty_operator`]. The problem is reduced to a symmetric
//! one through a Cholesky factor of `L_l + σ h Ĉ_X`, which is positive
//! definite even though both `L_1` and `Ĉ_X` are singular.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FofrError, Result};
use crate::grid::{Curve, Grid};
use crate::penalty::{cosine_frequency, penalty_operator};
use crate::sample::CovarianceEstimate;

// Relative size below which a generalized eigenvalue is treated as a null mode of J.
const NULL_MODE_TOL: f64 = 1e-10;
// Relative size of 1/(ρ+σ) below which a mode belongs to the null space of Ĉ_X.
const FINITE_MODE_TOL: f64 = 1e-11;
const SHIFT_FACTOR: f64 = 1e-4;
const RIDGE_FACTOR: f64 = 1e-10;

/// `η_l(t) = √2 cos((l-1) π t)`, with `η_1 ≡ 1`.
pub fn cosine_basis(l: usize, grid: &Grid) -> Result<Curve> {
    if l < 1 {
        return Err(FofrError::InvalidArgument("basis index starts at 1".into()));
    }
    if l == 1 {
        return Ok(Curve::from_fn(grid, |_| 1.0));
    }
    let c = cosine_frequency(l);
    Ok(Curve::from_fn(grid, |t| SQRT_2 * (c * t).cos()))
}

/// Growth exponents `(D̂, â)` of the penalty eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    /// Half the fitted log-log slope.
    pub d_tilde: f64,
    pub d_hat: f64,
    pub a_hat: f64,
    pub used: usize,
    pub dropped: usize,
}

/// Regress `log ρ_{kl}` on `log(kl)`; `D̃` is half the slope, `D̂ = max(D̃, 3)`, `â = D̂ - 2`.
///
/// Entries that are not strictly positive (null modes, unresolved modes
/// stored as NaN) are dropped and counted.
pub fn estimate_exponents(rho: &DMatrix<f64>) -> Result<Exponents> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut dropped = 0;
    for k in 0..rho.nrows() {
        for l in 0..rho.ncols() {
            let r = rho[(k, l)];
            if r > 0.0 && r.is_finite() {
                xs.push((((k + 1) * (l + 1)) as f64).ln());
                ys.push(r.ln());
            } else {
                dropped += 1;
            }
        }
    }
    let used = xs.len();
    if used < 3 {
        return Err(FofrError::InsufficientEigenvalues { usable: used });
    }
    let mx = xs.iter().sum::<f64>() / used as f64;
    let my = ys.iter().sum::<f64>() / used as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(FofrError::InsufficientEigenvalues { usable: used });
    }
    let d_tilde = sxy / sxx / 2.0;
    let d_hat = d_tilde.max(3.0);
    Ok(Exponents {
        d_tilde,
        d_hat,
        a_hat: d_hat - 2.0,
        used,
        dropped,
    })
}

/// Eigenpairs of one response frequency, sorted by ascending `ρ`.
#[derive(Clone, Debug)]
struct Block {
    rho: Vec<f64>,
    modes: DMatrix<f64>,
    ridged: bool,
}

/// Empirical basis `φ̂_{kl} = x̂_{kl} ⊗ η_l` for `1 <= k, l <= v`.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    grid: Grid,
    v: usize,
    eta: Vec<Curve>,
    /// `modes[l]` is `G x v`; column `k` holds `x̂_{k+1,l+1}`.
    modes: Vec<DMatrix<f64>>,
    /// `rho[(k, l)] = ρ̂_{k+1,l+1}`.
    rho: DMatrix<f64>,
    /// Eigenvalues at truncation `2v` used for the exponent fit; NaN where unresolved.
    rho_extended: DMatrix<f64>,
    exponents: Exponents,
    ridged: bool,
}

impl EigenSystem {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Truncation level `v`.
    pub fn v(&self) -> usize {
        self.v
    }

    /// Penalty order; only `m = 2` is implemented.
    pub fn m(&self) -> usize {
        2
    }

    pub fn eta(&self, l: usize) -> &Curve {
        &self.eta[l - 1]
    }

    pub fn x_hat(&self, k: usize, l: usize) -> Curve {
        Curve {
            grid: self.grid.clone(),
            values: self.modes[l - 1].column(k - 1).into_owned(),
        }
    }

    /// `G x v` matrix of `x̂_{·,l}` (1-based `l`).
    pub fn modes(&self, l: usize) -> &DMatrix<f64> {
        &self.modes[l - 1]
    }

    pub fn rho(&self) -> &DMatrix<f64> {
        &self.rho
    }

    pub fn rho_extended(&self) -> &DMatrix<f64> {
        &self.rho_extended
    }

    pub fn exponents(&self) -> Exponents {
        self.exponents
    }

    pub fn d_hat(&self) -> f64 {
        self.exponents.d_hat
    }

    pub fn a_hat(&self) -> f64 {
        self.exponents.a_hat
    }

    /// Whether a diagonal ridge had to be added to the weighted covariance.
    pub fn ridged(&self) -> bool {
        self.ridged
    }

    /// `G x v` matrix whose column `l` is `η_{l+1}`.
    pub fn eta_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.grid.size(), self.v, |j, l| self.eta[l].values[j])
    }

    /// `V̂(φ̂_{kl}, φ̂_{k'l'}) - δ_{kk'} δ_{ll'}` over all retained pairs, as max-abs.
    pub fn diagonalization_residual(&self, cov: &CovarianceEstimate) -> f64 {
        let h = self.grid.weight();
        let mut worst: f64 = 0.0;
        for l in 0..self.v {
            for lp in 0..self.v {
                let eta_inner = h * self.eta[l].values.dot(&self.eta[lp].values);
                let gram = self.modes[l].transpose() * &cov.matrix * &self.modes[lp] * (h * h);
                for k in 0..self.v {
                    for kp in 0..self.v {
                        let target = if k == kp && l == lp { 1.0 } else { 0.0 };
                        worst = worst.max((gram[(k, kp)] * eta_inner - target).abs());
                    }
                }
            }
        }
        worst
    }

    /// Restrict to a smaller truncation level without re-solving.
    pub fn truncated(&self, v: usize) -> Result<EigenSystem> {
        if v < 1 || v > self.v {
            return Err(FofrError::InvalidArgument(format!(
                "cannot truncate a v={} system to v={v}",
                self.v
            )));
        }
        Ok(EigenSystem {
            grid: self.grid.clone(),
            v,
            eta: self.eta[..v].to_vec(),
            modes: self.modes[..v].iter().map(|m| m.columns(0, v).into_owned()).collect(),
            rho: self.rho.view((0, 0), (v, v)).into_owned(),
            rho_extended: self.rho_extended.clone(),
            exponents: self.exponents,
            ridged: self.ridged,
        })
    }
}

/// Solve the eigenproblem for `l = 1..=2v`, keep `v x v` modes, and fit the
/// exponents on the `2v x 2v` eigenvalue table.
pub fn solve_eigensystem(cov: &CovarianceEstimate, v: usize, grid: &Grid) -> Result<EigenSystem> {
    grid.ensure_same(&cov.grid)?;
    if v < 1 {
        return Err(FofrError::InvalidArgument("truncation must be at least 1".into()));
    }
    if 4 * v > grid.size() {
        return Err(FofrError::InvalidArgument(format!(
            "truncation {v} exceeds the resolvable {} modes of a {}-point grid",
            grid.size() / 4,
            grid.size()
        )));
    }
    let wide = 2 * v;
    let blocks: Vec<Result<Block>> = (1..=wide)
        .into_par_iter()
        .map(|l| solve_block(cov, l, wide))
        .collect();
    let blocks: Vec<Block> = blocks.into_iter().collect::<Result<_>>()?;

    for (l, b) in blocks.iter().enumerate().take(v) {
        if b.rho.len() < v {
            return Err(FofrError::InsufficientRank {
                block: l + 1,
                requested: v,
                achievable: b.rho.len(),
            });
        }
    }

    let mut rho_extended = DMatrix::from_element(wide, wide, f64::NAN);
    for (l, b) in blocks.iter().enumerate() {
        for (k, &r) in b.rho.iter().enumerate() {
            rho_extended[(k, l)] = r;
        }
    }
    let exponents = estimate_exponents(&rho_extended)?;

    let eta = (1..=v).map(|l| cosine_basis(l, grid)).collect::<Result<Vec<_>>>()?;
    let modes = blocks[..v].iter().map(|b| b.modes.columns(0, v).into_owned()).collect();
    let rho = DMatrix::from_fn(v, v, |k, l| blocks[l].rho[k]);
    let ridged = blocks.iter().any(|b| b.ridged);

    Ok(EigenSystem {
        grid: grid.clone(),
        v,
        eta,
        modes,
        rho,
        rho_extended,
        exponents,
        ridged,
    })
}

fn solve_block(cov: &CovarianceEstimate, l: usize, keep: usize) -> Result<Block> {
    let grid = &cov.grid;
    let g = grid.size();
    let h = grid.weight();
    let op = penalty_operator(l, grid)?;
    let mut weighted = &cov.matrix * h;
    let trace_w = weighted.trace();
    if !(trace_w > 0.0) {
        return Err(FofrError::InsufficientRank {
            block: l,
            requested: keep,
            achievable: 0,
        });
    }
    let shift = SHIFT_FACTOR * op.trace() / trace_w;

    let mut ridged = false;
    let chol = match (&op + &weighted * shift).cholesky() {
        Some(c) => c,
        None => {
            ridged = true;
            let ridge = RIDGE_FACTOR * trace_w / g as f64;
            for i in 0..g {
                weighted[(i, i)] += ridge;
            }
            (&op + &weighted * shift)
                .cholesky()
                .ok_or(FofrError::InsufficientRank {
                    block: l,
                    requested: keep,
                    achievable: 0,
                })?
        }
    };

    // M = R^{-1} W R^{-T}, eigenvalues μ = 1 / (ρ + σ).
    let lower = chol.l();
    let left = lower
        .solve_lower_triangular(&weighted)
        .ok_or(FofrError::SingularSystem { block: l })?;
    let reduced = lower
        .solve_lower_triangular(&left.transpose())
        .ok_or(FofrError::SingularSystem { block: l })?;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::new(reduced);

    let mu_max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..g)
        .filter(|&i| eig.eigenvalues[i] > FINITE_MODE_TOL * mu_max)
        .collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order.truncate(keep);

    let upper = lower.transpose();
    let mut rho = Vec::with_capacity(order.len());
    let mut modes = DMatrix::zeros(g, order.len());
    for (col, &i) in order.iter().enumerate() {
        let y = eig.eigenvectors.column(i).into_owned();
        let mut x: DVector<f64> = upper
            .solve_upper_triangular(&y)
            .ok_or(FofrError::SingularSystem { block: l })?;
        let v_norm = h * h * x.dot(&(&cov.matrix * &x));
        x /= v_norm.sqrt();
        apply_sign_rule(&mut x);
        modes.set_column(col, &x);
        rho.push(1.0 / eig.eigenvalues[i] - shift);
    }
    let rho_max = rho.iter().cloned().fold(0.0, f64::max);
    for r in rho.iter_mut() {
        if *r < NULL_MODE_TOL * rho_max {
            *r = 0.0;
        }
    }
    let nulls = rho.iter().take_while(|&&r| r == 0.0).count();
    if nulls > 1 {
        canonical_null_basis(&mut modes, nulls, h);
    }
    Ok(Block { rho, modes, ridged })
}

/// The null modes share `ρ = 0`, so any V-orthonormal rotation of them is an
/// eigenbasis. Fix it by diagonalizing the L² Gram matrix, largest first.
fn canonical_null_basis(modes: &mut DMatrix<f64>, count: usize, h: f64) {
    let z = modes.columns(0, count).into_owned();
    let gram = z.tr_mul(&z) * h;
    let eig = SymmetricEigen::new((&gram + gram.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    for (col, &i) in order.iter().enumerate() {
        let mut x = &z * eig.eigenvectors.column(i);
        apply_sign_rule(&mut x);
        modes.set_column(col, &x);
    }
}

/// Make the first entry that is not negligible positive.
fn apply_sign_rule(x: &mut DVector<f64>) {
    let xmax = x.amax();
    if let Some(first) = x.iter().find(|v| v.abs() > 1e-8 * xmax) {
        if *first < 0.0 {
            x.neg_mut();
        }
    }
}
