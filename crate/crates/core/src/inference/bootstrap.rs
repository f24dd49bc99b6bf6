//! Multiplier bootstrap ensembles, simultaneous bands and pointwise intervals.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::eigen::{estimate_exponents, EigenSystem, Exponents};
use crate::error::{FofrError, Result};
use crate::estimator::{
    assemble_curve, assemble_surface, fit_coefficients, sample_multipliers, FittedModel,
    LambdaSelection, MultiplierWeights, ScalarFit, ScoreDecomposition,
};
use crate::grid::{Curve, Surface};

/// Default number of bootstrap replicates.
pub const DEFAULT_REPLICATES: usize = 300;

/// Rate factor `√n λ^{(2a+1)/(4D)}`.
pub fn rate_factor(n: usize, lambda: f64, exponents: &Exponents) -> f64 {
    (n as f64).sqrt() * lambda.powf((2.0 * exponents.a_hat + 1.0) / (4.0 * exponents.d_hat))
}

/// Replicates of `β̂*_q − β̂` for the surface model.
///
/// The deviations are stored unscaled; [`BootstrapEnsemble::process`] applies
/// the rate factor. Every threshold divides it back out, so decisions use the
/// raw deviations.
#[derive(Clone, Debug)]
pub struct BootstrapEnsemble {
    pub seed: u64,
    pub scale: f64,
    pub deviations: Vec<DMatrix<f64>>,
    /// `λ_q` selected by each replicate.
    pub lambdas: Vec<f64>,
}

impl BootstrapEnsemble {
    pub fn q(&self) -> usize {
        self.deviations.len()
    }

    /// `𝔾*_q = scale · (β̂*_q − β̂)`.
    pub fn process(&self, q: usize) -> DMatrix<f64> {
        &self.deviations[q] * self.scale
    }

    /// `sup |β̂*_q − β̂|` for every replicate.
    pub fn sup_abs(&self) -> Vec<f64> {
        self.deviations.iter().map(|d| d.amax()).collect()
    }

    /// Same raw deviations under a different rate factor.
    pub fn with_scale(&self, scale: f64) -> BootstrapEnsemble {
        BootstrapEnsemble {
            scale,
            ..self.clone()
        }
    }
}

fn replicate_coefficients(
    scores: &ScoreDecomposition,
    selection: &LambdaSelection,
    weights: &MultiplierWeights,
    index: usize,
) -> Result<(DMatrix<f64>, f64)> {
    fit_coefficients(scores, selection, Some(weights))
        .map(|r| (r.coeffs, r.lambda))
        .map_err(|e| FofrError::ReplicateFailed {
            index,
            source: Box::new(e),
        })
}

/// Refit with `Q` multiplier draws; replicate `q` uses stream `q` of `seed`.
pub fn bootstrap_ensemble(
    fitted: &FittedModel,
    q: usize,
    seed: u64,
    selection: &LambdaSelection,
) -> Result<BootstrapEnsemble> {
    if q < 1 {
        return Err(FofrError::InvalidArgument("need at least one bootstrap replicate".into()));
    }
    let n = fitted.scores.n();
    let weights: Vec<MultiplierWeights> = (0..q).map(|i| sample_multipliers(n, seed, i as u64)).collect();
    bootstrap_with_weights(fitted, &weights, seed, selection)
}

/// Bootstrap from explicit multiplier vectors.
pub fn bootstrap_with_weights(
    fitted: &FittedModel,
    weights: &[MultiplierWeights],
    seed: u64,
    selection: &LambdaSelection,
) -> Result<BootstrapEnsemble> {
    let es = &fitted.eigensystem;
    let reps: Vec<Result<(DMatrix<f64>, f64)>> = weights
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let (coeffs, lambda) = replicate_coefficients(&fitted.scores, selection, w, i)?;
            let dev = assemble_surface(&(coeffs - &fitted.coeffs), es)?;
            Ok((dev.values, lambda))
        })
        .collect();
    let (deviations, lambdas) = reps.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    Ok(BootstrapEnsemble {
        seed,
        scale: rate_factor(fitted.scores.n(), fitted.lambda, &es.exponents()),
        deviations,
        lambdas,
    })
}

/// Replicates of `β̂*_q − β̂` for the scalar-response model.
#[derive(Clone, Debug)]
pub struct ScalarEnsemble {
    pub seed: u64,
    pub scale: f64,
    pub deviations: Vec<DVector<f64>>,
    pub lambdas: Vec<f64>,
}

impl ScalarEnsemble {
    pub fn q(&self) -> usize {
        self.deviations.len()
    }

    pub fn process(&self, q: usize) -> DVector<f64> {
        &self.deviations[q] * self.scale
    }
}

/// Exponents of the one-dimensional penalty, fitted on `log ρ̂_{k1}` against `log k`.
pub fn scalar_exponents(es: &EigenSystem) -> Result<Exponents> {
    let column = es.rho_extended().column(0).into_owned();
    estimate_exponents(&DMatrix::from_column_slice(column.len(), 1, column.as_slice()))
}

pub fn bootstrap_scalar(fit: &ScalarFit, q: usize, seed: u64, selection: &LambdaSelection) -> Result<ScalarEnsemble> {
    if q < 1 {
        return Err(FofrError::InvalidArgument("need at least one bootstrap replicate".into()));
    }
    let n = fit.scores.n();
    let es = &fit.eigensystem;
    let reps: Vec<Result<(DVector<f64>, f64)>> = (0..q)
        .into_par_iter()
        .map(|i| {
            let w = sample_multipliers(n, seed, i as u64);
            let (coeffs, lambda) = replicate_coefficients(&fit.scores, selection, &w, i)?;
            let dev = assemble_curve(&(coeffs.column(0) - &fit.coeffs), es)?;
            Ok((dev.values, lambda))
        })
        .collect();
    let (deviations, lambdas) = reps.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    Ok(ScalarEnsemble {
        seed,
        scale: rate_factor(n, fit.lambda, &scalar_exponents(es)?),
        deviations,
        lambdas,
    })
}

/// Empirical `(1−α)` quantile: the order statistic of rank `⌊(1−α)Q⌋ + 1`.
///
/// Requires `Q ≥ ⌈1/α⌉`.
pub fn empirical_quantile(values: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let q = values.len();
    let min = (1.0 / alpha - 1e-9).ceil() as usize;
    if q < min.max(1) {
        return Err(FofrError::QuantileUnstable { q, min });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (((1.0 - alpha) * q as f64 + 1e-9).floor() as usize + 1).min(q);
    Ok(sorted[rank - 1])
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(FofrError::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Equal-width band `center ± half_width`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandResult<T> {
    pub center: T,
    pub lower: T,
    pub upper: T,
    pub alpha: f64,
    /// Quantile of the scaled sup statistic, `scale · half_width`.
    pub quantile: f64,
    /// Quantile of the unscaled sup statistic.
    pub half_width: f64,
    pub q: usize,
}

/// Simultaneous `(1−α)` region `β̂ ± 𝒬_{1−α}(sup|𝔾*|)/scale`.
pub fn simultaneous_region(ensemble: &BootstrapEnsemble, fitted: &FittedModel, alpha: f64) -> Result<BandResult<Surface>> {
    if let Some(d) = ensemble.deviations.first() {
        if d.shape() != fitted.beta_hat.values.shape() {
            return Err(FofrError::IncompatibleGrids {
                left: d.nrows(),
                right: fitted.beta_hat.grid.size(),
            });
        }
    }
    let hw = empirical_quantile(&ensemble.sup_abs(), alpha)?;
    let center = fitted.beta_hat.clone();
    let lower = Surface {
        grid: center.grid.clone(),
        values: center.values.add_scalar(-hw),
    };
    let upper = Surface {
        grid: center.grid.clone(),
        values: center.values.add_scalar(hw),
    };
    Ok(BandResult {
        center,
        lower,
        upper,
        alpha,
        quantile: hw * ensemble.scale,
        half_width: hw,
        q: ensemble.q(),
    })
}

/// `σ̂_τ(s,t) = {Σ_{k,l ≤ v} (1+λρ̂_{kl})⁻² φ̂_{kl}(s,t)²}^{1/2}`.
pub fn sigma_tau(es: &EigenSystem, lambda: f64, s_index: usize, t_index: usize) -> f64 {
    let mut total = 0.0;
    for l in 1..=es.v() {
        let eta = es.eta(l).values[t_index];
        let modes = es.modes(l);
        for k in 0..es.v() {
            let shrink = 1.0 / (1.0 + lambda * es.rho()[(k, l - 1)]);
            let phi = modes[(s_index, k)] * eta;
            total += shrink * shrink * phi * phi;
        }
    }
    total.sqrt()
}

/// Pointwise interval `β̂(s,t) ± 𝒬_{1−α/2} σ_ε σ̂_τ(s,t)/√n`.
///
/// `noise_sd` is the noise standard deviation in score units; pass 1 for the
/// standardized interval.
pub fn pointwise_interval(
    fitted: &FittedModel,
    s_index: usize,
    t_index: usize,
    alpha: f64,
    noise_sd: f64,
) -> Result<(f64, f64)> {
    let g = fitted.beta_hat.grid.size();
    if s_index >= g || t_index >= g {
        return Err(FofrError::InvalidArgument(format!("grid index out of range for G = {g}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(FofrError::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let z = Normal::standard().inverse_cdf(1.0 - alpha / 2.0).max(0.0);
    let n = fitted.scores.n() as f64;
    let half = z * noise_sd * sigma_tau(&fitted.eigensystem, fitted.lambda, s_index, t_index) / n.sqrt();
    let center = fitted.beta_hat.values[(s_index, t_index)];
    Ok((center - half, center + half))
}

/// Simultaneous band for `E[Y | X = x0]`, calibrated on `sup_t |∫(β̂*_q − β̂)(s,t) x0(s) ds|`.
pub fn prediction_band(
    x0: &Curve,
    fitted: &FittedModel,
    ensemble: &BootstrapEnsemble,
    alpha: f64,
) -> Result<BandResult<Curve>> {
    x0.grid.ensure_same(&fitted.beta_hat.grid)?;
    let h = x0.grid.weight();
    let mu = fitted.beta_hat.values.tr_mul(&x0.values) * h;
    let sups: Vec<f64> = ensemble
        .deviations
        .iter()
        .map(|d| (d.tr_mul(&x0.values) * h).amax())
        .collect();
    let hw = empirical_quantile(&sups, alpha)?;
    let grid = x0.grid.clone();
    Ok(BandResult {
        lower: Curve {
            grid: grid.clone(),
            values: mu.add_scalar(-hw),
        },
        upper: Curve {
            grid: grid.clone(),
            values: mu.add_scalar(hw),
        },
        center: Curve { grid, values: mu },
        alpha,
        quantile: hw * ensemble.scale,
        half_width: hw,
        q: ensemble.q(),
    })
}

