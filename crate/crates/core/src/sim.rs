//! Simulation designs and Monte Carlo studies.
//!
//! Predictors are `X = Σ_{j≤50} j⁻¹ Z_j f_j` with `Z_j ~ U(−√3, √3)` and the
//! cosine basis `f_1 = 1`, `f_{j+1} = √2 cos(jπs)`. Noise is Gaussian and
//! independent across grid points, with the pointwise variance of the chosen
//! error setting.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{solve_eigensystem, EigenSystem};
use crate::error::{FofrError, Result};
use crate::estimator::{default_truncation, fit, FittedModel, LambdaSelection};
use crate::grid::{make_grid, Curve, Grid, Surface};
use crate::inference::{
    bootstrap_ensemble, classical_test_bt, extremal_sets, plrt, relevant_test, simultaneous_region,
};
use crate::metrics::{metrics, ErrorMetrics};
use crate::sample::{center_sample, empirical_covariance, CovarianceEstimate, FunctionalSample};

/// Terms in every series expansion.
pub const SERIES_TERMS: usize = 50;
/// Grid size of the simulation designs.
pub const DEFAULT_GRID: usize = 100;
const SIGNAL_TO_NOISE: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dgp {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3")]
    Three,
}

impl Dgp {
    pub fn from_id(id: u32) -> Result<Self> {
        match id {
            1 => Ok(Dgp::One),
            2 => Ok(Dgp::Two),
            3 => Ok(Dgp::Three),
            _ => Err(FofrError::InvalidArgument(format!("unknown design {id}, expected 1, 2 or 3"))),
        }
    }

    pub fn id(self) -> u32 {
        match self {
            Dgp::One => 1,
            Dgp::Two => 2,
            Dgp::Three => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorSetting {
    I,
    Ii,
    Iii,
}

impl std::str::FromStr for ErrorSetting {
    type Err = FofrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "i" | "1" => Ok(ErrorSetting::I),
            "ii" | "2" => Ok(ErrorSetting::Ii),
            "iii" | "3" => Ok(ErrorSetting::Iii),
            _ => Err(FofrError::InvalidArgument(format!("unknown error setting {s:?}, expected i, ii or iii"))),
        }
    }
}

/// One simulation design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub dgp: Dgp,
    pub n: usize,
    pub grid_size: usize,
    pub error: ErrorSetting,
    pub seed: u64,
    /// Truncation; `None` uses `⌈n^{2/5}⌉`.
    pub v: Option<usize>,
    /// Replace `β₀` by zero while keeping the design's noise level.
    pub null_slope: bool,
}

impl DgpSpec {
    pub fn new(dgp: Dgp, n: usize, error: ErrorSetting, seed: u64) -> Result<Self> {
        let spec = DgpSpec {
            dgp,
            n,
            grid_size: DEFAULT_GRID,
            error,
            seed,
            v: None,
            null_slope: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(FofrError::InsufficientSample { n: self.n, min: 4 });
        }
        if self.grid_size < crate::penalty::MIN_PENALTY_GRID {
            return Err(FofrError::GridTooCoarse {
                size: self.grid_size,
                min: crate::penalty::MIN_PENALTY_GRID,
            });
        }
        Ok(())
    }

    pub fn truncation(&self) -> usize {
        self.v.unwrap_or_else(|| default_truncation(self.n))
    }
}

/// `f_j` with `f_1 = 1` and `f_{j+1}(s) = √2 cos(jπs)`.
pub fn cosine_series_term(j: usize, s: f64) -> f64 {
    if j == 1 {
        1.0
    } else {
        SQRT_2 * ((j - 1) as f64 * PI * s).cos()
    }
}

fn shifted_term(j: usize, s: f64) -> f64 {
    SQRT_2 * (1.0 + ((j - 1) as f64 * PI * s).cos())
}

/// True slope surface of a design.
pub fn dgp_beta(dgp: Dgp, grid: &Grid) -> Surface {
    Surface::from_fn(grid, |s, t| {
        let mut b = 1.0;
        for j in 2..=SERIES_TERMS {
            let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
            let c = 4.0 * sign / (j * j) as f64;
            b += match dgp {
                Dgp::One => c * cosine_series_term(j, s) * cosine_series_term(j, t),
                Dgp::Two => 0.0,
                Dgp::Three => c * shifted_term(j, s) * cosine_series_term(j, t),
            };
        }
        match dgp {
            Dgp::Two => (-(s + t)).exp(),
            _ => b,
        }
    })
}

/// `n` uncentered predictor curves as an `n x G` matrix.
pub fn dgp_predictors_raw(n: usize, grid: &Grid, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = grid.size();
    let basis = DMatrix::from_fn(SERIES_TERMS, g, |j, p| cosine_series_term(j + 1, grid.points()[p]) / (j + 1) as f64);
    let bound = 3f64.sqrt();
    let z = DMatrix::from_fn(n, SERIES_TERMS, |_, _| rng.random_range(-bound..bound));
    z * basis
}

/// Centered predictor sample.
pub fn dgp_predictors(n: usize, grid: &Grid, rng: &mut impl Rng) -> Result<FunctionalSample> {
    center_sample(&dgp_predictors_raw(n, grid, rng), grid)
}

/// `C_X(s, s') = Σ_j j⁻² f_j(s) f_j(s')`.
pub fn population_covariance(grid: &Grid) -> CovarianceEstimate {
    let g = grid.size();
    let basis = DMatrix::from_fn(g, SERIES_TERMS, |p, j| cosine_series_term(j + 1, grid.points()[p]) / (j + 1) as f64);
    let matrix = &basis * basis.transpose();
    CovarianceEstimate {
        grid: grid.clone(),
        matrix,
    }
}

/// `var Ỹ(t) = Σ_j j⁻² (∫ β(s,t) f_j(s) ds)²` for the series predictors.
pub fn signal_variance(beta: &Surface) -> Curve {
    let grid = &beta.grid;
    let h = grid.weight();
    let cov = population_covariance(grid);
    // var Ỹ(t) = h² Σ_{s,s'} β(s,t) C(s,s') β(s',t)
    let cb = &cov.matrix * &beta.values;
    let values = DVector::from_fn(grid.size(), |t, _| h * h * beta.values.column(t).dot(&cb.column(t)));
    Curve {
        grid: grid.clone(),
        values,
    }
}

/// Pointwise noise variance on the grid.
pub fn noise_variance(setting: ErrorSetting, beta: &Surface) -> Curve {
    let var = signal_variance(beta);
    let h = beta.grid.weight();
    let sigma1 = h * var.values.sum() / SIGNAL_TO_NOISE;
    let values = match setting {
        ErrorSetting::I => DVector::from_element(var.values.len(), sigma1),
        // σ²(t) = 0.1 (var Ỹ(t) + σ²(t))
        ErrorSetting::Ii => var.values.map(|v| v.max(0.0) / (SIGNAL_TO_NOISE - 1.0)),
        ErrorSetting::Iii => DVector::from_element(var.values.len(), 2.0 * sigma1),
    };
    Curve {
        grid: beta.grid.clone(),
        values,
    }
}

/// `n` independent noise curves with the given pointwise variance.
pub fn error_curves(variance: &Curve, n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let sd = variance.values.map(|v| v.max(0.0).sqrt());
    DMatrix::from_fn(n, variance.grid.size(), |_, j| sd[j] * rng.sample::<f64, _>(StandardNormal))
}

/// One simulated dataset.
#[derive(Clone, Debug)]
pub struct SimData {
    pub x: FunctionalSample,
    pub y: FunctionalSample,
    pub beta0: Surface,
}

/// Shared, replicate-independent parts of a design.
#[derive(Clone, Debug)]
pub struct Design {
    pub spec: DgpSpec,
    pub grid: Grid,
    pub beta0: Surface,
    pub noise: Curve,
    pub population: CovarianceEstimate,
}

impl Design {
    pub fn new(spec: &DgpSpec) -> Result<Self> {
        spec.validate()?;
        let grid = make_grid(spec.grid_size)?;
        let design_beta = dgp_beta(spec.dgp, &grid);
        let noise = noise_variance(spec.error, &design_beta);
        let beta0 = if spec.null_slope {
            Surface::zeros(&grid)
        } else {
            design_beta
        };
        Ok(Design {
            spec: spec.clone(),
            population: population_covariance(&grid),
            grid,
            beta0,
            noise,
        })
    }

    /// Dataset `r`, drawn from stream `r` of the design seed.
    pub fn generate(&self, r: usize) -> Result<SimData> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(r as u64);
        let n = self.spec.n;
        let xraw = dgp_predictors_raw(n, &self.grid, &mut rng);
        let signal = &xraw * &self.beta0.values * self.grid.weight();
        let yraw = signal + error_curves(&self.noise, n, &mut rng);
        Ok(SimData {
            x: center_sample(&xraw, &self.grid)?,
            y: center_sample(&yraw, &self.grid)?,
            beta0: self.beta0.clone(),
        })
    }

    /// Eigensystem and GCV fit for dataset `r`.
    pub fn fit(&self, data: &SimData) -> Result<FittedModel> {
        let es = Arc::new(self.eigensystem(data)?);
        fit(&data.x, &data.y, es, &LambdaSelection::Gcv, None)
    }

    fn eigensystem(&self, data: &SimData) -> Result<EigenSystem> {
        let cov = empirical_covariance(&data.x)?;
        solve_eigensystem(&cov, self.spec.truncation(), &self.grid)
    }
}

/// Bootstrap seed of dataset `r`, decorrelated from the data streams.
pub fn replicate_seed(seed: u64, r: usize) -> u64 {
    let mut z = seed ^ (r as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Quartiles with linear interpolation between order statistics.
pub fn quartiles(values: &[f64]) -> Quartiles {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let at = |p: f64| {
        if v.is_empty() {
            return f64::NAN;
        }
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Quartiles {
        q1: at(0.25),
        median: at(0.5),
        q3: at(0.75),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectionPoint {
    pub delta: f64,
    pub rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    Estimation,
    Coverage,
    Power,
    Classical,
}

/// Aggregate results of a Monte Carlo study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub study: StudyKind,
    pub spec: DgpSpec,
    pub replicates: usize,
    pub q: Option<usize>,
    pub alpha: Option<f64>,
    pub v: usize,
    pub ise: Option<Quartiles>,
    pub epr: Option<Quartiles>,
    pub md: Option<Quartiles>,
    pub ucp: Option<f64>,
    pub rejection: Vec<RejectionPoint>,
    pub bt_rate: Option<f64>,
    pub plrt_rate: Option<f64>,
    pub median_lambda: f64,
    pub median_d_hat: f64,
    pub median_a_hat: f64,
    pub wall_time_secs: f64,
}

impl MonteCarloReport {
    fn empty(study: StudyKind, spec: &DgpSpec, replicates: usize) -> Self {
        MonteCarloReport {
            study,
            spec: spec.clone(),
            replicates,
            q: None,
            alpha: None,
            v: spec.truncation(),
            ise: None,
            epr: None,
            md: None,
            ucp: None,
            rejection: Vec::new(),
            bt_rate: None,
            plrt_rate: None,
            median_lambda: f64::NAN,
            median_d_hat: f64::NAN,
            median_a_hat: f64::NAN,
            wall_time_secs: 0.0,
        }
    }
}

struct Replicate<T> {
    lambda: f64,
    d_hat: f64,
    a_hat: f64,
    value: T,
}

fn run_replicates<T: Send>(
    design: &Design,
    replicates: usize,
    body: impl Fn(usize, &SimData, &FittedModel) -> Result<T> + Sync,
) -> Result<Vec<Replicate<T>>> {
    if replicates < 1 {
        return Err(FofrError::InvalidArgument("need at least one replicate".into()));
    }
    let out: Vec<Result<Replicate<T>>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let data = design.generate(r)?;
            let fitted = design.fit(&data)?;
            let value = body(r, &data, &fitted)?;
            Ok(Replicate {
                lambda: fitted.lambda,
                d_hat: fitted.eigensystem.d_hat(),
                a_hat: fitted.eigensystem.a_hat(),
                value,
            })
        })
        .collect();
    out.into_iter()
        .enumerate()
        .map(|(r, x)| {
            x.map_err(|e| FofrError::ReplicateFailed {
                index: r,
                source: Box::new(e),
            })
        })
        .collect()
}

fn finish<T>(report: &mut MonteCarloReport, reps: &[Replicate<T>], start: Instant) {
    report.median_lambda = quartiles(&reps.iter().map(|r| r.lambda).collect::<Vec<_>>()).median;
    report.median_d_hat = quartiles(&reps.iter().map(|r| r.d_hat).collect::<Vec<_>>()).median;
    report.median_a_hat = quartiles(&reps.iter().map(|r| r.a_hat).collect::<Vec<_>>()).median;
    report.wall_time_secs = start.elapsed().as_secs_f64();
}

/// ISE, EPR and MD quartiles over `replicates` datasets.
pub fn run_estimation_study(spec: &DgpSpec, replicates: usize) -> Result<MonteCarloReport> {
    let start = Instant::now();
    let design = Design::new(spec)?;
    let reps = run_replicates(&design, replicates, |_, data, fitted| {
        metrics(&fitted.beta_hat, &data.beta0, &design.population)
    })?;
    let pick = |f: fn(&ErrorMetrics) -> f64| quartiles(&reps.iter().map(|r| f(&r.value)).collect::<Vec<_>>());
    let mut report = MonteCarloReport::empty(StudyKind::Estimation, spec, replicates);
    report.ise = Some(pick(|m| m.ise));
    report.epr = Some(pick(|m| m.epr));
    report.md = Some(pick(|m| m.md));
    finish(&mut report, &reps, start);
    Ok(report)
}

/// Fraction of datasets whose simultaneous band contains `β₀` everywhere.
pub fn run_coverage_study(spec: &DgpSpec, replicates: usize, q: usize, alpha: f64) -> Result<MonteCarloReport> {
    let start = Instant::now();
    let design = Design::new(spec)?;
    let reps = run_replicates(&design, replicates, |r, data, fitted| {
        let ens = bootstrap_ensemble(fitted, q, replicate_seed(spec.seed, r), &LambdaSelection::Gcv)?;
        let band = simultaneous_region(&ens, fitted, alpha)?;
        let md = (&fitted.beta_hat.values - &data.beta0.values).amax();
        Ok(md <= band.half_width)
    })?;
    let mut report = MonteCarloReport::empty(StudyKind::Coverage, spec, replicates);
    report.q = Some(q);
    report.alpha = Some(alpha);
    report.ucp = Some(reps.iter().filter(|r| r.value).count() as f64 / replicates as f64);
    finish(&mut report, &reps, start);
    Ok(report)
}

/// Default `Δ` grid: 10 points from `d_∞/4` to `2 d_∞`.
pub fn default_delta_grid(d_inf: f64) -> Vec<f64> {
    (0..10).map(|i| d_inf * (0.25 + 1.75 * i as f64 / 9.0)).collect()
}

/// Rejection rates of the relevant test with `β_* = 0` over a grid of `Δ`.
///
/// Each dataset builds one ensemble and reuses it for every `Δ`.
pub fn run_power_study(
    spec: &DgpSpec,
    deltas: &[f64],
    replicates: usize,
    q: usize,
    alpha: f64,
) -> Result<MonteCarloReport> {
    let start = Instant::now();
    let design = Design::new(spec)?;
    let zero = Surface::zeros(&design.grid);
    let reps = run_replicates(&design, replicates, |r, _, fitted| {
        let ens = bootstrap_ensemble(fitted, q, replicate_seed(spec.seed, r), &LambdaSelection::Gcv)?;
        let masks = extremal_sets(fitted, &zero, None)?;
        deltas
            .iter()
            .map(|&d| relevant_test(d, alpha, &ens, &masks).map(|t| t.reject))
            .collect::<Result<Vec<bool>>>()
    })?;
    let mut report = MonteCarloReport::empty(StudyKind::Power, spec, replicates);
    report.q = Some(q);
    report.alpha = Some(alpha);
    report.rejection = deltas
        .iter()
        .enumerate()
        .map(|(i, &delta)| RejectionPoint {
            delta,
            rate: reps.iter().filter(|r| r.value[i]).count() as f64 / replicates as f64,
        })
        .collect();
    finish(&mut report, &reps, start);
    Ok(report)
}

/// Rejection rates of the band-duality test and the PLRT for `β = 0`.
pub fn run_classical_study(spec: &DgpSpec, replicates: usize, q: usize, alpha: f64) -> Result<MonteCarloReport> {
    let start = Instant::now();
    let design = Design::new(spec)?;
    let zero = Surface::zeros(&design.grid);
    let reps = run_replicates(&design, replicates, |r, data, fitted| {
        let ens = bootstrap_ensemble(fitted, q, replicate_seed(spec.seed, r), &LambdaSelection::Gcv)?;
        let band = simultaneous_region(&ens, fitted, alpha)?;
        let bt = classical_test_bt(&zero, &band)?.reject;
        let lr = plrt(&zero, &data.x, &data.y, fitted, alpha)?.reject;
        Ok((bt, lr))
    })?;
    let mut report = MonteCarloReport::empty(StudyKind::Classical, spec, replicates);
    report.q = Some(q);
    report.alpha = Some(alpha);
    report.bt_rate = Some(reps.iter().filter(|r| r.value.0).count() as f64 / replicates as f64);
    report.plrt_rate = Some(reps.iter().filter(|r| r.value.1).count() as f64 / replicates as f64);
    finish(&mut report, &reps, start);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dgp_two_values() {
        let g = make_grid(100).unwrap();
        let b = dgp_beta(Dgp::Two, &g);
        let p0 = g.points()[0];
        assert!((b.values[(0, 0)] - (-2.0 * p0).exp()).abs() < 1e-15);
        assert!((Surface::from_fn(&g, |s, t| (-(s + t)).exp()).values - &b.values).amax() == 0.0);
        // sup over [0,1]^2 is 1 at the origin; the grid misses it by h
        assert!((b.max_abs() - 1.0).abs() < 0.011);
    }

    #[test]
    fn dgp_one_maximum() {
        let g = make_grid(100).unwrap();
        let b = dgp_beta(Dgp::One, &g);
        assert!((b.max_abs() - 6.0).abs() < 0.35, "{}", b.max_abs());
        let (imax, jmax) = b.values.iter().enumerate().fold((0, 0.0f64), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        let (row, col) = (imax % 100, imax / 100);
        assert!((row == 0 && col == 99) || (row == 99 && col == 0), "argmax at {row},{col} ({jmax})");
        assert!((&b.values - b.values.transpose()).amax() < 1e-12);
        let b3 = dgp_beta(Dgp::Three, &g);
        assert!((&b3.values - b3.values.transpose()).amax() > 0.1);
    }

    #[test]
    fn zero_scores_give_zero_curves() {
        let g = make_grid(20).unwrap();
        let basis_zero = DMatrix::<f64>::zeros(3, SERIES_TERMS) * DMatrix::from_fn(SERIES_TERMS, 20, |j, p| cosine_series_term(j + 1, g.points()[p]));
        assert!(basis_zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn predictor_covariance_matches_population() {
        let g = make_grid(50).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = dgp_predictors(5000, &g, &mut rng).unwrap();
        let emp = empirical_covariance(&x).unwrap();
        let pop = population_covariance(&g);
        for j in 0..50 {
            let r = emp.matrix[(j, j)] / pop.matrix[(j, j)];
            assert!((r - 1.0).abs() < 0.05, "point {j}: ratio {r}");
        }
    }

    #[test]
    fn noise_settings() {
        let g = make_grid(60).unwrap();
        let b = dgp_beta(Dgp::Two, &g);
        let v1 = noise_variance(ErrorSetting::I, &b);
        let v3 = noise_variance(ErrorSetting::Iii, &b);
        assert!((&v3.values - &v1.values * 2.0).amax() < 1e-15);
        let v2 = noise_variance(ErrorSetting::Ii, &b);
        assert!(v2.values.iter().all(|&v| v >= 0.0));
        let sig = signal_variance(&b);
        for j in 0..60 {
            let total = sig.values[j] + v2.values[j];
            assert!((v2.values[j] - 0.1 * total).abs() < 1e-14);
        }
        let zero = Curve::zeros(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(error_curves(&zero, 3, &mut rng).iter().all(|&e| e == 0.0));
    }

    #[test]
    fn signal_to_noise_by_simulation() {
        let g = make_grid(40).unwrap();
        let b = dgp_beta(Dgp::One, &g);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = dgp_predictors_raw(10_000, &g, &mut rng);
        let ytilde = &x * &b.values * g.weight();
        let h = g.weight();
        let mean = DVector::from_fn(40, |j, _| ytilde.column(j).mean());
        let integrated: f64 = (0..40)
            .map(|j| (ytilde.column(j).add_scalar(-mean[j])).norm_squared() / 10_000.0 * h)
            .sum();
        let sigma1 = noise_variance(ErrorSetting::I, &b).values[0];
        let ratio = integrated / sigma1;
        assert!((ratio - 10.0).abs() < 0.3, "snr {ratio}");
    }

    #[test]
    fn generation_is_reproducible() {
        let mut spec = DgpSpec::new(Dgp::Two, 20, ErrorSetting::I, 4).unwrap();
        spec.grid_size = 30;
        let d = Design::new(&spec).unwrap();
        let a = d.generate(3).unwrap();
        let b = d.generate(3).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert_ne!(d.generate(4).unwrap().x, a.x);
        assert!(DgpSpec::new(Dgp::Two, 3, ErrorSetting::I, 0).is_err());
    }

    #[test]
    fn single_replicate_quartiles() {
        let mut spec = DgpSpec::new(Dgp::Two, 30, ErrorSetting::I, 2).unwrap();
        spec.grid_size = 30;
        let r = run_estimation_study(&spec, 1).unwrap();
        let ise = r.ise.unwrap();
        assert_eq!(ise.q1, ise.median);
        assert_eq!(ise.median, ise.q3);
        let again = run_estimation_study(&spec, 1).unwrap();
        assert_eq!(r.ise, again.ise);
    }

    #[test]
    fn quartile_order() {
        let q = quartiles(&[5.0, 1.0, 3.0, 2.0, 4.0]);
        assert_eq!((q.q1, q.median, q.q3), (2.0, 3.0, 4.0));
        let grid = default_delta_grid(6.0);
        assert_eq!(grid.len(), 10);
        assert!((grid[0] - 1.5).abs() < 1e-12 && (grid[9] - 12.0).abs() < 1e-12);
    }
}
