//! Penalized least squares in the truncated basis.
//!
//! With scores `ω_{ikl} = ⟨X_i, x̂_{kl}⟩` and `Ỹ_{il} = ⟨Y_i, η_l⟩` the
//! objective separates over `l`, and each block is the weighted ridge problem
//! `b_l = (Ω_lᵀ M Ω_l + nλ Λ_l)⁻¹ Ω_lᵀ M Ỹ_l`.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eigen::EigenSystem;
use crate::error::{FofrError, Result};
use crate::grid::{Curve, Surface};
use crate::sample::FunctionalSample;

/// Number of points in the default GCV grid.
pub const LAMBDA_GRID_POINTS: usize = 40;
const LAMBDA_GRID_LOW: f64 = 1e-10;
const LAMBDA_GRID_HIGH: f64 = 1e2;
const SVD_RANK_TOL: f64 = 1e-12;

/// Default truncation `v = ⌈n^{2/5}⌉`.
pub fn default_truncation(n: usize) -> usize {
    let v = (n as f64).powf(0.4).ceil() as usize;
    // guard against powf landing just above an integer
    if v > 1 && ((v - 1) as f64).powf(2.5) >= n as f64 {
        v - 1
    } else {
        v.max(1)
    }
}

/// Per-block scores. The surface model has `v` blocks, the scalar model one.
#[derive(Clone, Debug)]
pub struct ScoreDecomposition {
    n: usize,
    omega: Vec<DMatrix<f64>>,
    ytilde: Vec<DVector<f64>>,
    penalty: Vec<DVector<f64>>,
}

impl ScoreDecomposition {
    /// Assemble from precomputed parts; all blocks must agree in shape.
    pub fn new(
        omega: Vec<DMatrix<f64>>,
        ytilde: Vec<DVector<f64>>,
        penalty: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let blocks = omega.len();
        if blocks == 0 || ytilde.len() != blocks || penalty.len() != blocks {
            return Err(FofrError::InvalidArgument("score blocks are inconsistent".into()));
        }
        let (n, v) = omega[0].shape();
        for l in 0..blocks {
            if omega[l].shape() != (n, v) || ytilde[l].len() != n || penalty[l].len() != v {
                return Err(FofrError::InvalidArgument(format!("score block {} has the wrong shape", l + 1)));
            }
            if penalty[l].iter().any(|&r| !(r >= 0.0)) {
                return Err(FofrError::InvalidArgument("penalty eigenvalues must be nonnegative".into()));
            }
        }
        Ok(ScoreDecomposition {
            n,
            omega,
            ytilde,
            penalty,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Coefficients per block.
    pub fn v(&self) -> usize {
        self.omega[0].ncols()
    }

    pub fn blocks(&self) -> usize {
        self.omega.len()
    }

    /// `Ω_l` (1-based `l`).
    pub fn omega(&self, l: usize) -> &DMatrix<f64> {
        &self.omega[l - 1]
    }

    pub fn ytilde(&self, l: usize) -> &DVector<f64> {
        &self.ytilde[l - 1]
    }

    /// Diagonal of `Λ_l`.
    pub fn penalty(&self, l: usize) -> &DVector<f64> {
        &self.penalty[l - 1]
    }

    /// Residual sum of squares `Σ_l ‖Ỹ_l - Ω_l b_l‖²` for coefficients `b` (column `l` is `b_l`).
    pub fn residual_ss(&self, coeffs: &DMatrix<f64>) -> f64 {
        (0..self.blocks())
            .map(|l| (&self.ytilde[l] - &self.omega[l] * coeffs.column(l)).norm_squared())
            .sum()
    }
}

/// Scores of the surface model by midpoint quadrature.
pub fn compute_scores(x: &FunctionalSample, y: &FunctionalSample, es: &EigenSystem) -> Result<ScoreDecomposition> {
    check_pair(x, y.n())?;
    x.grid().ensure_same(es.grid())?;
    y.grid().ensure_same(es.grid())?;
    let h = es.grid().weight();
    let v = es.v();
    let omega = (1..=v).map(|l| x.data() * es.modes(l) * h).collect();
    let ytilde = (1..=v).map(|l| y.data() * &es.eta(l).values * h).collect();
    let penalty = (0..v).map(|l| es.rho().column(l).into_owned()).collect();
    ScoreDecomposition::new(omega, ytilde, penalty)
}

/// Scores of the scalar-response model: only the `l = 1` block, with `Ỹ_1 = y`.
pub fn compute_scalar_scores(x: &FunctionalSample, y: &DVector<f64>, es: &EigenSystem) -> Result<ScoreDecomposition> {
    check_pair(x, y.len())?;
    x.grid().ensure_same(es.grid())?;
    let h = es.grid().weight();
    let omega = vec![x.data() * es.modes(1) * h];
    let penalty = vec![es.rho().column(0).into_owned()];
    ScoreDecomposition::new(omega, vec![y.clone()], penalty)
}

fn check_pair(x: &FunctionalSample, ny: usize) -> Result<()> {
    if x.n() != ny {
        return Err(FofrError::IncompatibleSamples { left: x.n(), right: ny });
    }
    Ok(())
}

/// Bootstrap weights drawn from the two-point law with mean and variance 1.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierWeights {
    pub values: DVector<f64>,
}

/// Smaller support point, taken with probability 2/3.
pub const MULTIPLIER_LOW: f64 = 1.0 - 1.0 / SQRT_2;
/// Larger support point, taken with probability 1/3.
pub const MULTIPLIER_HIGH: f64 = 1.0 + SQRT_2;

impl MultiplierWeights {
    pub fn ones(n: usize) -> Self {
        MultiplierWeights {
            values: DVector::from_element(n, 1.0),
        }
    }

    pub fn draw(n: usize, rng: &mut impl Rng) -> Self {
        let values = DVector::from_fn(n, |_, _| {
            if rng.random::<f64>() < 2.0 / 3.0 {
                MULTIPLIER_LOW
            } else {
                MULTIPLIER_HIGH
            }
        });
        MultiplierWeights { values }
    }
}

/// `n` multipliers from stream `stream` of the master `seed`.
pub fn sample_multipliers(n: usize, seed: u64, stream: u64) -> MultiplierWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    MultiplierWeights::draw(n, &mut rng)
}

/// Weighted normal equations `Ωᵀ M Ω`, `Ωᵀ M Ỹ` for every block.
struct Normal<'a> {
    scores: &'a ScoreDecomposition,
    gram: Vec<DMatrix<f64>>,
    rhs: Vec<DVector<f64>>,
}

impl<'a> Normal<'a> {
    fn new(scores: &'a ScoreDecomposition, weights: Option<&MultiplierWeights>) -> Result<Self> {
        let n = scores.n();
        let ones;
        let m = match weights {
            Some(w) => {
                if w.values.len() != n {
                    return Err(FofrError::IncompatibleSamples {
                        left: w.values.len(),
                        right: n,
                    });
                }
                &w.values
            }
            None => {
                ones = DVector::from_element(n, 1.0);
                &ones
            }
        };
        let mut gram = Vec::with_capacity(scores.blocks());
        let mut rhs = Vec::with_capacity(scores.blocks());
        for l in 0..scores.blocks() {
            let om = &scores.omega[l];
            let mut weighted = om.clone();
            for (i, mut row) in weighted.row_iter_mut().enumerate() {
                row *= m[i];
            }
            gram.push(weighted.tr_mul(om));
            rhs.push(weighted.tr_mul(&scores.ytilde[l]));
        }
        Ok(Normal { scores, gram, rhs })
    }

    fn system(&self, l: usize, lambda: f64) -> DMatrix<f64> {
        let n = self.scores.n() as f64;
        let mut s = self.gram[l].clone();
        for k in 0..s.nrows() {
            s[(k, k)] += n * lambda * self.scores.penalty[l][k];
        }
        s
    }

    /// Coefficients of every block and the hat-matrix trace.
    fn solve(&self, lambda: f64) -> Result<(DMatrix<f64>, f64)> {
        let v = self.scores.v();
        let mut coeffs = DMatrix::zeros(v, self.scores.blocks());
        let mut trace = 0.0;
        for l in 0..self.scores.blocks() {
            let s = self.system(l, lambda);
            let (b, inv_gram) = solve_spd(&s, &self.rhs[l], &self.gram[l]).ok_or(FofrError::SingularSystem { block: l + 1 })?;
            coeffs.set_column(l, &b);
            trace += inv_gram.trace();
        }
        Ok((coeffs, trace))
    }

    fn gcv(&self, lambda: f64) -> Result<(f64, DMatrix<f64>)> {
        let n = self.scores.n() as f64;
        let (coeffs, trace) = self.solve(lambda)?;
        if trace >= n {
            return Err(FofrError::GcvUndefined {
                lambda,
                trace,
                n: self.scores.n(),
            });
        }
        let rss = self.scores.residual_ss(&coeffs);
        let denom = (1.0 - trace / n).powi(2);
        Ok((rss / n / denom, coeffs))
    }
}

/// Solve `S b = r` and `S Z = A`; Cholesky first, rank-checked SVD otherwise.
fn solve_spd(s: &DMatrix<f64>, r: &DVector<f64>, a: &DMatrix<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let scale = s.diagonal().amax();
    let well_posed = |ch: &nalgebra::Cholesky<f64, nalgebra::Dyn>| {
        ch.l_dirty().diagonal().iter().all(|d| d * d > SVD_RANK_TOL * scale)
    };
    if let Some(ch) = s.clone().cholesky().filter(well_posed) {
        let b = ch.solve(r);
        let z = ch.solve(a);
        if b.iter().chain(z.iter()).all(|x| x.is_finite()) {
            return Some((b, z));
        }
    }
    let svd = s.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) || svd.singular_values.min() <= SVD_RANK_TOL * smax {
        return None;
    }
    let b = svd.solve(r, 0.0).ok()?;
    let z = svd.solve(a, 0.0).ok()?;
    Some((b, z))
}

/// Ridge coefficients, column `l` holding `b_l`. `weights = None` means unit weights.
pub fn ridge_solve(scores: &ScoreDecomposition, lambda: f64, weights: Option<&MultiplierWeights>) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    Ok(Normal::new(scores, weights)?.solve(lambda)?.0)
}

/// Trace of the hat matrix, `Σ_l tr{(Ω_lᵀ M Ω_l + nλΛ_l)⁻¹ Ω_lᵀ M Ω_l}`.
pub fn hat_trace(scores: &ScoreDecomposition, lambda: f64, weights: Option<&MultiplierWeights>) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(Normal::new(scores, weights)?.solve(lambda)?.1)
}

/// `GCV(λ) = n⁻¹ Σ_l ‖Ŷ_l − Ỹ_l‖² / (1 − tr H / n)²`.
pub fn gcv_score(scores: &ScoreDecomposition, lambda: f64, weights: Option<&MultiplierWeights>) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(Normal::new(scores, weights)?.gcv(lambda)?.0)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(FofrError::InvalidArgument(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    Ok(())
}

/// Minimizer of GCV over `grid`; ties go to the larger `λ`.
pub fn select_lambda(scores: &ScoreDecomposition, weights: Option<&MultiplierWeights>, grid: &[f64]) -> Result<f64> {
    let normal = Normal::new(scores, weights)?;
    Ok(select_with(&normal, grid)?.0)
}

fn select_with(normal: &Normal, grid: &[f64]) -> Result<(f64, f64, DMatrix<f64>)> {
    if grid.is_empty() {
        return Err(FofrError::InvalidArgument("lambda grid is empty".into()));
    }
    let mut best: Option<(f64, f64, DMatrix<f64>)> = None;
    for &lambda in grid {
        check_lambda(lambda)?;
        let Ok((score, coeffs)) = normal.gcv(lambda) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((bl, bs, _)) => score < *bs || (score == *bs && lambda > *bl),
        };
        if better {
            best = Some((lambda, score, coeffs));
        }
    }
    best.ok_or(FofrError::NoValidLambda)
}

/// 40 log-spaced values of `g / (n · median ρ̂)` with `g ∈ [1e-10, 1e2]`.
pub fn default_lambda_grid(scores: &ScoreDecomposition) -> Vec<f64> {
    let mut positive: Vec<f64> = scores
        .penalty
        .iter()
        .flat_map(|p| p.iter().copied())
        .filter(|&r| r > 0.0)
        .collect();
    positive.sort_by(f64::total_cmp);
    let median = if positive.is_empty() {
        1.0
    } else if positive.len() % 2 == 1 {
        positive[positive.len() / 2]
    } else {
        0.5 * (positive[positive.len() / 2 - 1] + positive[positive.len() / 2])
    };
    let scale = 1.0 / (scores.n() as f64 * median);
    let (lo, hi) = (LAMBDA_GRID_LOW.ln(), LAMBDA_GRID_HIGH.ln());
    (0..LAMBDA_GRID_POINTS)
        .map(|i| (lo + (hi - lo) * i as f64 / (LAMBDA_GRID_POINTS - 1) as f64).exp() * scale)
        .collect()
}

/// How the smoothing parameter is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LambdaSelection {
    /// GCV over the default grid.
    Gcv,
    /// GCV over a caller-supplied grid.
    GcvGrid(Vec<f64>),
    Fixed(f64),
}

/// `β(s,t) = Σ_{k,l} b_{kl} x̂_{kl}(s) η_l(t)` on the grid.
pub fn assemble_surface(coeffs: &DMatrix<f64>, es: &EigenSystem) -> Result<Surface> {
    let v = es.v();
    if coeffs.shape() != (v, v) {
        return Err(FofrError::InvalidArgument(format!(
            "coefficients are {}x{}, expected {v}x{v}",
            coeffs.nrows(),
            coeffs.ncols()
        )));
    }
    let g = es.grid().size();
    let mut profile = DMatrix::zeros(g, v);
    for l in 0..v {
        profile.set_column(l, &(es.modes(l + 1) * coeffs.column(l)));
    }
    let values = profile * es.eta_matrix().transpose();
    Ok(Surface {
        grid: es.grid().clone(),
        values,
    })
}

/// A fitted surface model.
#[derive(Clone, Debug)]
pub struct FittedModel {
    pub eigensystem: Arc<EigenSystem>,
    pub scores: Arc<ScoreDecomposition>,
    pub lambda: f64,
    /// `b̂`, row `k`, column `l`.
    pub coeffs: DMatrix<f64>,
    pub beta_hat: Surface,
    /// GCV score at `lambda`; NaN when undefined for a fixed `λ`.
    pub gcv: f64,
    pub hat_trace: f64,
}

impl FittedModel {
    /// `Ĵ(β̂, β̂) = Σ ρ̂_{kl} b̂_{kl}²`.
    pub fn penalty(&self) -> f64 {
        coefficient_penalty(&self.coeffs, &self.scores)
    }

    /// Score-space noise variance `Σ_l ‖Ỹ_l − Ω_l b̂_l‖² / (n v − tr H)`.
    pub fn noise_variance(&self) -> f64 {
        noise_variance(&self.scores, &self.coeffs, self.hat_trace)
    }
}

pub(crate) fn coefficient_penalty(coeffs: &DMatrix<f64>, scores: &ScoreDecomposition) -> f64 {
    (0..scores.blocks())
        .map(|l| {
            scores.penalty[l]
                .iter()
                .zip(coeffs.column(l).iter())
                .map(|(r, b)| r * b * b)
                .sum::<f64>()
        })
        .sum()
}

pub(crate) fn noise_variance(scores: &ScoreDecomposition, coeffs: &DMatrix<f64>, trace: f64) -> f64 {
    let dof = (scores.n() * scores.blocks()) as f64 - trace;
    scores.residual_ss(coeffs) / dof.max(1.0)
}

/// Coefficients, `λ`, GCV and hat trace for one (possibly weighted) fit.
#[derive(Clone, Debug)]
pub struct RidgeFit {
    pub lambda: f64,
    pub coeffs: DMatrix<f64>,
    pub gcv: f64,
    pub hat_trace: f64,
}

/// Select `λ` and solve; shared by the plain fit and bootstrap replicates.
pub fn fit_coefficients(
    scores: &ScoreDecomposition,
    selection: &LambdaSelection,
    weights: Option<&MultiplierWeights>,
) -> Result<RidgeFit> {
    let normal = Normal::new(scores, weights)?;
    let (lambda, gcv, coeffs) = match selection {
        LambdaSelection::Gcv => select_with(&normal, &default_lambda_grid(scores))?,
        LambdaSelection::GcvGrid(grid) => select_with(&normal, grid)?,
        LambdaSelection::Fixed(lambda) => {
            check_lambda(*lambda)?;
            match normal.gcv(*lambda) {
                Ok((g, c)) => (*lambda, g, c),
                Err(FofrError::GcvUndefined { .. }) => (*lambda, f64::NAN, normal.solve(*lambda)?.0),
                Err(e) => return Err(e),
            }
        }
    };
    let hat_trace = normal.solve(lambda)?.1;
    Ok(RidgeFit {
        lambda,
        coeffs,
        gcv,
        hat_trace,
    })
}

/// Fit the surface model from precomputed scores.
pub fn fit_scores(
    scores: Arc<ScoreDecomposition>,
    es: Arc<EigenSystem>,
    selection: &LambdaSelection,
    weights: Option<&MultiplierWeights>,
) -> Result<FittedModel> {
    let r = fit_coefficients(&scores, selection, weights)?;
    let beta_hat = assemble_surface(&r.coeffs, &es)?;
    Ok(FittedModel {
        eigensystem: es,
        scores,
        lambda: r.lambda,
        coeffs: r.coeffs,
        beta_hat,
        gcv: r.gcv,
        hat_trace: r.hat_trace,
    })
}

/// Scores, `λ` selection, ridge solve and assembly; with weights this is one bootstrap replicate.
pub fn fit(
    x: &FunctionalSample,
    y: &FunctionalSample,
    es: Arc<EigenSystem>,
    selection: &LambdaSelection,
    weights: Option<&MultiplierWeights>,
) -> Result<FittedModel> {
    if !x.is_centered() {
        return Err(FofrError::MustCenterFirst {
            max_col_sum: x.max_column_sum(),
        });
    }
    if !y.is_centered() {
        return Err(FofrError::MustCenterFirst {
            max_col_sum: y.max_column_sum(),
        });
    }
    let scores = Arc::new(compute_scores(x, y, &es)?);
    fit_scores(scores, es, selection, weights)
}

/// A fitted scalar-response model.
#[derive(Clone, Debug)]
pub struct ScalarFit {
    pub eigensystem: Arc<EigenSystem>,
    pub scores: Arc<ScoreDecomposition>,
    pub lambda: f64,
    pub coeffs: DVector<f64>,
    pub beta_hat: Curve,
    pub gcv: f64,
    pub hat_trace: f64,
}

/// `β(s) = Σ_k b_k x̂_{k1}(s)`.
pub fn assemble_curve(coeffs: &DVector<f64>, es: &EigenSystem) -> Result<Curve> {
    if coeffs.len() != es.v() {
        return Err(FofrError::InvalidArgument(format!(
            "expected {} coefficients, got {}",
            es.v(),
            coeffs.len()
        )));
    }
    Ok(Curve {
        grid: es.grid().clone(),
        values: es.modes(1) * coeffs,
    })
}

pub fn fit_scalar_scores(
    scores: Arc<ScoreDecomposition>,
    es: Arc<EigenSystem>,
    selection: &LambdaSelection,
    weights: Option<&MultiplierWeights>,
) -> Result<ScalarFit> {
    let r = fit_coefficients(&scores, selection, weights)?;
    let coeffs = r.coeffs.column(0).into_owned();
    let beta_hat = assemble_curve(&coeffs, &es)?;
    Ok(ScalarFit {
        eigensystem: es,
        scores,
        lambda: r.lambda,
        coeffs,
        beta_hat,
        gcv: r.gcv,
        hat_trace: r.hat_trace,
    })
}

/// Scalar-on-function fit using only the first response block.
pub fn fit_scalar(
    x: &FunctionalSample,
    y: &DVector<f64>,
    es: Arc<EigenSystem>,
    selection: &LambdaSelection,
    weights: Option<&MultiplierWeights>,
) -> Result<ScalarFit> {
    if !x.is_centered() {
        return Err(FofrError::MustCenterFirst {
            max_col_sum: x.max_column_sum(),
        });
    }
    let scale = y.amax().max(1.0);
    if y.sum().abs() > 1e-10 * y.len() as f64 * scale {
        return Err(FofrError::MustCenterFirst { max_col_sum: y.sum().abs() });
    }
    let scores = Arc::new(compute_scalar_scores(x, y, &es)?);
    fit_scalar_scores(scores, es, selection, weights)
}
