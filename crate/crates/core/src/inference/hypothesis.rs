//! Classical and relevant hypothesis tests for the slope.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::bootstrap::{check_alpha, empirical_quantile, BandResult, BootstrapEnsemble, ScalarEnsemble};
use crate::error::{FofrError, Result};
use crate::estimator::{FittedModel, ScalarFit};
use crate::grid::{Curve, Surface};
use crate::penalty::spectral_penalty;
use crate::sample::FunctionalSample;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    ClassicalBt,
    Plrt,
    Relevant,
    RelevantScalar,
}

/// Outcome of a test; `reject` is always `statistic > threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub kind: TestKind,
    pub statistic: f64,
    pub threshold: f64,
    pub reject: bool,
    pub diagnostics: BTreeMap<String, f64>,
}

impl TestResult {
    fn new(kind: TestKind, statistic: f64, threshold: f64, diagnostics: BTreeMap<String, f64>) -> Self {
        TestResult {
            kind,
            statistic,
            threshold,
            reject: statistic > threshold,
            diagnostics,
        }
    }
}

/// Reject `β = β_*` when `β_*` leaves the simultaneous band anywhere.
///
/// The statistic is the largest distance of `β_*` outside the band.
pub fn classical_test_bt(beta_star: &Surface, band: &BandResult<Surface>) -> Result<TestResult> {
    beta_star.grid.ensure_same(&band.center.grid)?;
    let md = (&beta_star.values - &band.center.values).amax();
    let statistic = (md - band.half_width).max(0.0);
    let mut diag = BTreeMap::new();
    diag.insert("max_deviation".into(), md);
    diag.insert("half_width".into(), band.half_width);
    diag.insert("alpha".into(), band.alpha);
    Ok(TestResult::new(TestKind::ClassicalBt, statistic, 0.0, diag))
}

/// Objective `L_{n,λ}(β) = (1/2n) Σ_i ∫ (Y_i − ∫X_i β)² + (λ/2) J(β, β)` by quadrature.
pub fn penalized_objective(beta: &Surface, x: &FunctionalSample, y: &FunctionalSample, lambda: f64) -> Result<f64> {
    beta.grid.ensure_same(x.grid())?;
    beta.grid.ensure_same(y.grid())?;
    if x.n() != y.n() {
        return Err(FofrError::IncompatibleSamples { left: x.n(), right: y.n() });
    }
    let h = beta.grid.weight();
    let resid = y.data() - x.data() * &beta.values * h;
    let loss = h * resid.norm_squared() / (2.0 * x.n() as f64);
    Ok(loss + 0.5 * lambda * spectral_penalty(beta)?)
}

/// `u_n` and `σ_n²` from the truncated sums over `k, l ≤ v`.
pub fn plrt_moments(rho: &DMatrix<f64>, lambda: f64) -> (f64, f64) {
    let s1: f64 = rho.iter().map(|r| 1.0 / (1.0 + lambda * r)).sum();
    let s2: f64 = rho.iter().map(|r| (1.0 + lambda * r).powi(-2)).sum();
    (s1 * s1 / s2, s1 / s2)
}

/// Closed form of `L_{n,λ}(0) − L_{n,λ}(β̂)`: `(1/2n) Σ_l c_lᵀ (Ω_lᵀΩ_l + nλΛ_l)⁻¹ c_l`, `c_l = Ω_lᵀỸ_l`.
pub fn plrt_zero_statistic(fitted: &FittedModel) -> Result<f64> {
    let s = &fitted.scores;
    let n = s.n() as f64;
    let mut total = 0.0;
    for l in 1..=s.blocks() {
        let om = s.omega(l);
        let c = om.tr_mul(s.ytilde(l));
        let mut sys = om.tr_mul(om);
        for k in 0..sys.nrows() {
            sys[(k, k)] += n * fitted.lambda * s.penalty(l)[k];
        }
        let sol = sys.lu().solve(&c).ok_or(FofrError::SingularSystem { block: l })?;
        total += c.dot(&sol);
    }
    Ok(total / (2.0 * n))
}

/// Penalized likelihood ratio test of `β = β_*` at the fitted `λ`.
///
/// Rejects when `(2nσ_n² 𝔏_n(β_*)/σ̂_ε² − u_n)/√(2u_n)` exceeds the normal
/// `(1−α)` quantile, with `σ̂_ε²` the score-space residual variance.
pub fn plrt(
    beta_star: &Surface,
    x: &FunctionalSample,
    y: &FunctionalSample,
    fitted: &FittedModel,
    alpha: f64,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    beta_star.grid.ensure_same(&fitted.beta_hat.grid)?;
    let lambda = fitted.lambda;
    let (u, sigma2) = plrt_moments(fitted.eigensystem.rho(), lambda);
    if !(u > 0.0) {
        return Err(FofrError::DegenerateTruncation { u_n: u });
    }
    let at_star = penalized_objective(beta_star, x, y, lambda)?;
    let at_hat = penalized_objective(&fitted.beta_hat, x, y, lambda)?;
    let lr = at_star - at_hat;
    let noise = fitted.noise_variance();
    if !(noise > 0.0) {
        return Err(FofrError::DegenerateTruncation { u_n: u });
    }
    let n = fitted.scores.n() as f64;
    let statistic = (2.0 * n * sigma2 * lr / noise - u) / (2.0 * u).sqrt();
    let threshold = Normal::standard().inverse_cdf(1.0 - alpha);
    let mut diag = BTreeMap::new();
    diag.insert("likelihood_ratio".into(), lr);
    diag.insert("u_n".into(), u);
    diag.insert("sigma_n2".into(), sigma2);
    diag.insert("noise_variance".into(), noise);
    diag.insert("lambda".into(), lambda);
    Ok(TestResult::new(TestKind::Plrt, statistic, threshold, diag))
}

/// Grid points near the positive and negative extremes of `β̂ − β_*`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtremalMasks {
    /// Column-major over the grid, matching `DMatrix` storage.
    pub plus: Vec<bool>,
    pub minus: Vec<bool>,
    pub cutoff: f64,
    pub dhat: f64,
}

impl ExtremalMasks {
    pub fn from_difference(diff: &[f64], cutoff: f64) -> Self {
        let dhat = diff.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        ExtremalMasks {
            plus: diff.iter().map(|&d| d >= dhat - cutoff).collect(),
            minus: diff.iter().map(|&d| d <= -dhat + cutoff).collect(),
            cutoff,
            dhat,
        }
    }

    pub fn plus_count(&self) -> usize {
        self.plus.iter().filter(|&&b| b).count()
    }

    pub fn minus_count(&self) -> usize {
        self.minus.iter().filter(|&&b| b).count()
    }

    /// Masks as `G x G` boolean matrices.
    pub fn as_matrices(&self, g: usize) -> (DMatrix<bool>, DMatrix<bool>) {
        (
            DMatrix::from_column_slice(g, g, &self.plus),
            DMatrix::from_column_slice(g, g, &self.minus),
        )
    }
}

/// Default cut-off constant `c = ‖β̂‖_∞ / 4`.
pub fn default_cutoff_constant(beta_hat_max_abs: f64) -> f64 {
    beta_hat_max_abs / 4.0
}

fn cutoff(c: f64, n: usize) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(FofrError::InvalidArgument(format!("cut-off constant must be positive, got {c}")));
    }
    let n = n as f64;
    Ok(c * n.ln() / n.sqrt())
}

/// `Ê±` with cut-off `c log n / √n`; `c = None` uses [`default_cutoff_constant`].
pub fn extremal_sets(fitted: &FittedModel, beta_star: &Surface, c: Option<f64>) -> Result<ExtremalMasks> {
    beta_star.grid.ensure_same(&fitted.beta_hat.grid)?;
    let c = c.unwrap_or_else(|| default_cutoff_constant(fitted.beta_hat.max_abs()));
    let diff = &fitted.beta_hat.values - &beta_star.values;
    Ok(ExtremalMasks::from_difference(diff.as_slice(), cutoff(c, fitted.scores.n())?))
}

/// `max{ max_{Ê+} d, max_{Ê−} (−d) }` for one deviation field.
fn masked_extreme(dev: &[f64], masks: &ExtremalMasks) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for (i, &d) in dev.iter().enumerate() {
        if masks.plus[i] {
            m = m.max(d);
        }
        if masks.minus[i] {
            m = m.max(-d);
        }
    }
    m
}

fn relevant_core<'a>(
    kind: TestKind,
    delta: f64,
    alpha: f64,
    scale: f64,
    deviations: impl Iterator<Item = &'a [f64]>,
    masks: &ExtremalMasks,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    if !(delta >= 0.0) {
        return Err(FofrError::InvalidArgument(format!("delta must be nonnegative, got {delta}")));
    }
    if masks.plus_count() + masks.minus_count() == 0 {
        return Err(FofrError::InvalidMasks);
    }
    let stats: Vec<f64> = deviations
        .map(|d| {
            if d.len() != masks.plus.len() {
                Err(FofrError::InvalidMasks)
            } else {
                Ok(masked_extreme(d, masks))
            }
        })
        .collect::<Result<_>>()?;
    let quantile = empirical_quantile(&stats, alpha)?;
    let mut diag = BTreeMap::new();
    diag.insert("quantile".into(), quantile);
    diag.insert("scaled_quantile".into(), quantile * scale);
    diag.insert("delta".into(), delta);
    diag.insert("cutoff".into(), masks.cutoff);
    diag.insert("plus_points".into(), masks.plus_count() as f64);
    diag.insert("minus_points".into(), masks.minus_count() as f64);
    Ok(TestResult::new(kind, masks.dhat, delta + quantile, diag))
}

/// Test of `H0: sup|β − β_*| ≤ Δ`; rejects when `d̂_∞ > Δ + 𝒬_{1−α}(T̂*_ℰ)/scale`.
pub fn relevant_test(delta: f64, alpha: f64, ensemble: &BootstrapEnsemble, masks: &ExtremalMasks) -> Result<TestResult> {
    relevant_core(
        TestKind::Relevant,
        delta,
        alpha,
        ensemble.scale,
        ensemble.deviations.iter().map(|d| d.as_slice()),
        masks,
    )
}

/// Scalar-response analogue of [`relevant_test`], with masks over the `G` grid points.
pub fn relevant_test_scalar(
    beta_star: &Curve,
    fit: &ScalarFit,
    delta: f64,
    alpha: f64,
    ensemble: &ScalarEnsemble,
    c: Option<f64>,
) -> Result<TestResult> {
    beta_star.grid.ensure_same(&fit.beta_hat.grid)?;
    let c = c.unwrap_or_else(|| default_cutoff_constant(fit.beta_hat.max_abs()));
    let diff: DVector<f64> = &fit.beta_hat.values - &beta_star.values;
    let masks = ExtremalMasks::from_difference(diff.as_slice(), cutoff(c, fit.scores.n())?);
    relevant_core(
        TestKind::RelevantScalar,
        delta,
        alpha,
        ensemble.scale,
        ensemble.deviations.iter().map(|d| d.as_slice()),
        &masks,
    )
}
