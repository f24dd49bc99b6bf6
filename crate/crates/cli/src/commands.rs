//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use fofr_core::inference::{
    bootstrap_ensemble, bootstrap_scalar, classical_test_bt, extremal_sets, plrt, prediction_band,
    relevant_test, relevant_test_scalar, scalar_exponents, simultaneous_region, BandResult, TestResult,
};
use fofr_core::io::{
    read_matrix_csv, read_surface_csv, read_vector_csv, write_curve_band_csv, write_curve_csv, write_json,
    write_surface_band_csv, write_surface_csv, write_table_csv,
};
use fofr_core::sim::{
    default_delta_grid, dgp_beta, run_classical_study, run_coverage_study, run_estimation_study, run_power_study,
    Dgp, DgpSpec, ErrorSetting, MonteCarloReport,
};
use fofr_core::{
    center_sample, empirical_covariance, fit, fit_scalar, loo_prediction_metrics, make_grid, solve_eigensystem,
    Curve, EigenSystem, FittedModel, FunctionalSample, Grid, LambdaSelection, Surface,
};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::config::{BetaStar, Command, ExtremalConstant, LambdaMode, Method, RunConfig, Study};
use crate::error::CliError;

enum Response {
    Functional(FunctionalSample),
    /// Centered responses and their mean.
    Scalar(DVector<f64>, f64),
}

struct Data {
    grid: Grid,
    x_raw: DMatrix<f64>,
    y_raw: Option<DMatrix<f64>>,
    x: FunctionalSample,
    y: Option<Response>,
}

impl Data {
    fn n(&self) -> usize {
        self.x.n()
    }

    fn functional_y(&self, command: Command) -> Result<&FunctionalSample, CliError> {
        match &self.y {
            Some(Response::Functional(y)) => Ok(y),
            _ => Err(CliError::Data(format!(
                "{} needs a functional response with one column per grid point",
                command.name()
            ))),
        }
    }
}

fn load(cfg: &RunConfig) -> Result<Data, CliError> {
    let xpath = cfg.x.as_ref().expect("validated");
    let x_raw = read_matrix_csv(xpath)?;
    let grid = make_grid(x_raw.ncols())?;
    let x = center_sample(&x_raw, &grid)?;
    let (y_raw, y) = match &cfg.y {
        None => (None, None),
        Some(path) => {
            let y_raw = read_matrix_csv(path)?;
            if y_raw.nrows() != x_raw.nrows() {
                return Err(CliError::Data(format!(
                    "{} has {} subjects but {} has {}",
                    xpath.display(),
                    x_raw.nrows(),
                    path.display(),
                    y_raw.nrows()
                )));
            }
            let resp = if y_raw.ncols() == 1 && x_raw.ncols() > 1 {
                let col = y_raw.column(0).into_owned();
                let mean = col.mean();
                Response::Scalar(col.add_scalar(-mean), mean)
            } else if y_raw.ncols() == x_raw.ncols() {
                Response::Functional(center_sample(&y_raw, &grid)?)
            } else {
                return Err(CliError::Data(format!(
                    "responses have {} columns; expected 1 or {}",
                    y_raw.ncols(),
                    x_raw.ncols()
                )));
            };
            (Some(y_raw), Some(resp))
        }
    };
    Ok(Data { grid, x_raw, y_raw, x, y })
}

fn selection(cfg: &RunConfig) -> LambdaSelection {
    match cfg.lambda {
        LambdaMode::Gcv => LambdaSelection::Gcv,
        LambdaMode::Fixed(l) => LambdaSelection::Fixed(l),
    }
}

fn eigensystem(cfg: &RunConfig, data: &Data) -> Result<Arc<EigenSystem>, CliError> {
    let cov = empirical_covariance(&data.x)?;
    Ok(Arc::new(solve_eigensystem(&cov, cfg.truncation(data.n()), &data.grid)?))
}

fn fit_model(cfg: &RunConfig, data: &Data) -> Result<FittedModel, CliError> {
    let es = eigensystem(cfg, data)?;
    let y = data.functional_y(cfg.command)?;
    Ok(fit(&data.x, y, es, &selection(cfg), None)?)
}

/// `stem.json` → `stem.<tag>.csv` in the same directory.
fn companion(out: &Path, tag: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.{tag}.csv"))
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Fields every run records.
fn audit(cfg: &RunConfig, v: usize, q: Option<usize>, lambda: f64, d_hat: f64, a_hat: f64) -> Value {
    json!({
        "command": cfg.command.name(),
        "seed": cfg.seed,
        "v": v,
        "Q": q,
        "lambda": lambda,
        "d_hat": d_hat,
        "a_hat": a_hat,
        "alpha": cfg.alpha,
    })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Some(b), Value::Object(e)) = (base.as_object_mut(), extra) {
        b.extend(e);
    }
    base
}

fn finish(cfg: &RunConfig, summary: &Value) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => write_json(path, summary)?,
        None => println!("{}", serde_json::to_string_pretty(summary).map_err(fofr_core::FofrError::from)?),
    }
    Ok(())
}

fn test_json(t: &TestResult) -> Value {
    serde_json::to_value(t).unwrap_or(Value::Null)
}

fn band_json<T>(band: &BandResult<T>, scale: f64) -> Value {
    json!({
        "half_width": band.half_width,
        "scaled_quantile": band.quantile,
        "rate_factor": scale,
    })
}

fn beta_star_surface(cfg: &RunConfig, grid: &Grid) -> Result<Surface, CliError> {
    match &cfg.beta_star {
        BetaStar::Zero => Ok(Surface::zeros(grid)),
        BetaStar::File(p) => Ok(read_surface_csv(p, grid)?),
    }
}

fn beta_star_curve(cfg: &RunConfig, grid: &Grid) -> Result<Curve, CliError> {
    match &cfg.beta_star {
        BetaStar::Zero => Ok(Curve::zeros(grid)),
        BetaStar::File(p) => Ok(Curve::new(grid.clone(), read_vector_csv(p)?)?),
    }
}

fn cutoff_constant(cfg: &RunConfig) -> Option<f64> {
    match cfg.c {
        ExtremalConstant::Auto => None,
        ExtremalConstant::Value(c) => Some(c),
    }
}

pub fn execute(cfg: &RunConfig) -> Result<(), CliError> {
    match cfg.command {
        Command::Eigensystem => run_eigensystem(cfg),
        Command::Fit => run_fit(cfg),
        Command::Confband => run_confband(cfg),
        Command::TestClassical => run_test_classical(cfg),
        Command::TestRelevant => run_test_relevant(cfg),
        Command::PredictBand => run_predict_band(cfg),
        Command::Simulate => run_simulate(cfg),
        Command::LooEval => run_loo(cfg),
    }
}

fn run_eigensystem(cfg: &RunConfig) -> Result<(), CliError> {
    let data = load(cfg)?;
    let es = eigensystem(cfg, &data)?;
    let cov = empirical_covariance(&data.x)?;
    let ex = es.exponents();
    let summary = merge(
        audit(cfg, es.v(), None, f64::NAN, ex.d_hat, ex.a_hat),
        json!({
            "n": data.n(),
            "grid_size": data.grid.size(),
            "rho": matrix_rows(es.rho()),
            "rho_extended": matrix_rows(es.rho_extended()),
            "d_tilde": ex.d_tilde,
            "exponent_points_used": ex.used,
            "exponent_points_dropped": ex.dropped,
            "diagonalization_residual": es.diagonalization_residual(&cov),
            "ridged": es.ridged(),
        }),
    );
    if let Some(out) = &cfg.out {
        let v = es.v();
        let mut header = vec!["s".to_string()];
        for l in 1..=v {
            for k in 1..=v {
                header.push(format!("x_{k}_{l}"));
            }
        }
        let rows: Vec<Vec<f64>> = (0..data.grid.size())
            .map(|i| {
                let mut row = vec![data.grid.points()[i]];
                for l in 1..=v {
                    row.extend(es.modes(l).row(i).iter().copied());
                }
                row
            })
            .collect();
        let names: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        write_table_csv(&companion(out, "modes"), &names, &rows)?;
    }
    finish(cfg, &summary)
}

fn run_fit(cfg: &RunConfig) -> Result<(), CliError> {
    let data = load(cfg)?;
    if let Some(Response::Scalar(y, mean)) = &data.y {
        let es = eigensystem(cfg, &data)?;
        let f = fit_scalar(&data.x, y, es.clone(), &selection(cfg), None)?;
        let ex = scalar_exponents(&es)?;
        let summary = merge(
            audit(cfg, es.v(), None, f.lambda, ex.d_hat, ex.a_hat),
            json!({
                "response": "scalar",
                "intercept": mean,
                "coefficients": f.coeffs.iter().copied().collect::<Vec<f64>>(),
                "gcv": f.gcv,
                "hat_trace": f.hat_trace,
            }),
        );
        if let Some(out) = &cfg.out {
            write_curve_csv(&companion(out, "beta"), &f.beta_hat)?;
        }
        return finish(cfg, &summary);
    }
    let f = fit_model(cfg, &data)?;
    let es = &f.eigensystem;
    let summary = merge(
        audit(cfg, es.v(), None, f.lambda, es.d_hat(), es.a_hat()),
        json!({
            "response": "functional",
            "coefficients": matrix_rows(&f.coeffs),
            "gcv": f.gcv,
            "hat_trace": f.hat_trace,
            "noise_variance": f.noise_variance(),
        }),
    );
    if let Some(out) = &cfg.out {
        write_surface_csv(&companion(out, "surface"), &f.beta_hat)?;
    }
    finish(cfg, &summary)
}

fn run_confband(cfg: &RunConfig) -> Result<(), CliError> {
    let data = load(cfg)?;
    let f = fit_model(cfg, &data)?;
    let ens = bootstrap_ensemble(&f, cfg.q, cfg.seed(), &selection(cfg))?;
    let band = simultaneous_region(&ens, &f, cfg.alpha)?;
    let es = &f.eigensystem;
    let summary = merge(audit(cfg, es.v(), Some(cfg.q), f.lambda, es.d_hat(), es.a_hat()), band_json(&band, ens.scale));
    if let Some(out) = &cfg.out {
        write_surface_band_csv(&companion(out, "band"), &band)?;
    }
    finish(cfg, &summary)
}

fn run_test_classical(cfg: &RunConfig) -> Result<(), CliError> {
    let data = load(cfg)?;
    let f = fit_model(cfg, &data)?;
    let star = beta_star_surface(cfg, &data.grid)?;
    let es = &f.eigensystem;
    let (result, q, extra) = match cfg.method {
        Method::Bt => {
            let ens = bootstrap_ensemble(&f, cfg.q, cfg.seed(), &selection(cfg))?;
            let band = simultaneous_region(&ens, &f, cfg.alpha)?;
            (classical_test_bt(&star, &band)?, Some(cfg.q), band_json(&band, ens.scale))
        }
        Method::Plrt => {
            let y = data.functional_y(cfg.command)?;
            (plrt(&star, &data.x, y, &f, cfg.alpha)?, None, json!({}))
        }
    };
    let summary = merge(
        merge(audit(cfg, es.v(), q, f.lambda, es.d_hat(), es.a_hat()), extra),
        json!({ "test": test_json(&result) }),
    );
    finish(cfg, &summary)
}

fn run_test_relevant(cfg: &RunConfig) -> Result<(), CliError> {
    let data = load(cfg)?;
    let delta = cfg.delta.expect("validated");
    let sel = selection(cfg);
    if let Some(Response::Scalar(y, _)) = &data.y {
        let es = eigensystem(cfg, &data)?;
        let f = fit_scalar(&data.x, y, es.clone(), &sel, None)?;
        let ens = bootstrap_scalar(&f, cfg.q, cfg.seed(), &sel)?;
        let star = beta_star_curve(cfg, &data.grid)?;
        let t = relevant_test_scalar(&star, &f, delta, cfg.alpha, &ens, cutoff_constant(cfg))?;
        let ex = scalar_exponents(&es)?;
        let summary = merge(
            audit(cfg, es.v(), Some(cfg.q), f.lambda, ex.d_hat, ex.a_hat),
            json!({ "response": "scalar", "rate_factor": ens.scale, "test": test_json(&t) }),
        );
        return finish(cfg, &summary);
    }
    let f = fit_model(cfg, &data)?;
    let ens = bootstrap_ensemble(&f, cfg.q, cfg.seed(), &sel)?;
    let star = beta_star_surface(cfg, &data.grid)?;
    let masks = extremal_sets(&f, &star, cutoff_constant(cfg))?;
    let t = relevant_test(delta, cfg.alpha, &ens, &masks)?;
    let es = &f.eigensystem;
    let summary = merge(
        audit(cfg, es.v(), Some(cfg.q), f.lambda, es.d_hat(), es.a_hat()),
        json!({ "response": "functional", "rate_factor": ens.scale, "test": test_json(&t) }),
    );
    finish(cfg, &summary)
}

fn run_predict_band(cfg: &RunConfig) -> Result<(), CliError> {
    let data = load(cfg)?;
    let f = fit_model(cfg, &data)?;
    let ens = bootstrap_ensemble(&f, cfg.q, cfg.seed(), &selection(cfg))?;
    let raw = read_vector_csv(cfg.x0.as_ref().expect("validated"))?;
    let x0 = Curve::new(data.grid.clone(), raw - &data.x.mean().values)?;
    let mut band = prediction_band(&x0, &f, &ens, cfg.alpha)?;
    // the model is fitted on centered data; restore the response mean
    let ymean = &data.functional_y(cfg.command)?.mean().values;
    for c in [&mut band.center, &mut band.lower, &mut band.upper] {
        c.values += ymean;
    }
    let es = &f.eigensystem;
    let summary = merge(audit(cfg, es.v(), Some(cfg.q), f.lambda, es.d_hat(), es.a_hat()), band_json(&band, ens.scale));
    if let Some(out) = &cfg.out {
        write_curve_band_csv(&companion(out, "band"), &band)?;
    }
    finish(cfg, &summary)
}

fn simulation_spec(cfg: &RunConfig) -> Result<DgpSpec, CliError> {
    let error: ErrorSetting = cfg.error.parse()?;
    let mut spec = DgpSpec::new(Dgp::from_id(cfg.dgp)?, cfg.n.expect("validated"), error, cfg.seed())?;
    spec.grid_size = cfg.grid;
    spec.v = cfg.v;
    spec.validate()?;
    Ok(spec)
}

fn report_table(report: &MonteCarloReport) -> (Vec<&'static str>, Vec<Vec<f64>>) {
    match cfg_study(report) {
        Study::Estimation => {
            let mut row = Vec::new();
            for q in [report.ise, report.epr, report.md] {
                let q = q.unwrap_or(fofr_core::sim::Quartiles { q1: f64::NAN, median: f64::NAN, q3: f64::NAN });
                row.extend([q.q1, q.median, q.q3]);
            }
            let header = vec![
                "ise_q1", "ise_median", "ise_q3", "epr_q1", "epr_median", "epr_q3", "md_q1", "md_median", "md_q3",
            ];
            (header, vec![row])
        }
        Study::Coverage => (vec!["alpha", "ucp"], vec![vec![report.alpha.unwrap_or(f64::NAN), report.ucp.unwrap_or(f64::NAN)]]),
        Study::Power => (
            vec!["delta", "rate"],
            report.rejection.iter().map(|p| vec![p.delta, p.rate]).collect(),
        ),
        Study::Classical => (
            vec!["bt_rate", "plrt_rate"],
            vec![vec![report.bt_rate.unwrap_or(f64::NAN), report.plrt_rate.unwrap_or(f64::NAN)]],
        ),
    }
}

fn cfg_study(report: &MonteCarloReport) -> Study {
    use fofr_core::sim::StudyKind;
    match report.study {
        StudyKind::Estimation => Study::Estimation,
        StudyKind::Coverage => Study::Coverage,
        StudyKind::Power => Study::Power,
        StudyKind::Classical => Study::Classical,
    }
}

fn run_simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = simulation_spec(cfg)?;
    let report = match cfg.study {
        Study::Estimation => run_estimation_study(&spec, cfg.reps)?,
        Study::Coverage => run_coverage_study(&spec, cfg.reps, cfg.q, cfg.alpha)?,
        Study::Classical => run_classical_study(&spec, cfg.reps, cfg.q, cfg.alpha)?,
        Study::Power => {
            let d_inf = dgp_beta(spec.dgp, &make_grid(spec.grid_size)?).max_abs();
            run_power_study(&spec, &default_delta_grid(d_inf), cfg.reps, cfg.q, cfg.alpha)?
        }
    };
    let q = (cfg.study != Study::Estimation).then_some(cfg.q);
    let summary = merge(
        audit(cfg, report.v, q, report.median_lambda, report.median_d_hat, report.median_a_hat),
        json!({ "report": serde_json::to_value(&report).map_err(fofr_core::FofrError::from)? }),
    );
    if let Some(out) = &cfg.out {
        let (header, rows) = report_table(&report);
        write_table_csv(&companion(out, "study"), &header, &rows)?;
    }
    finish(cfg, &summary)
}

fn run_loo(cfg: &RunConfig) -> Result<(), CliError> {
    let data = load(cfg)?;
    let y_raw = data.y_raw.as_ref().expect("validated");
    data.functional_y(cfg.command)?;
    let v = cfg.truncation(data.n());
    let metrics = loo_prediction_metrics(&data.x_raw, y_raw, &data.grid, v, &selection(cfg))?;
    let ispe: Vec<f64> = metrics.iter().map(|m| m.ispe).collect();
    let mpd: Vec<f64> = metrics.iter().map(|m| m.mpd).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let es = eigensystem(cfg, &data)?;
    let lambdas: Vec<f64> = metrics.iter().map(|m| m.lambda).collect();
    let summary = merge(
        audit(cfg, v, None, fofr_core::sim::quartiles(&lambdas).median, es.d_hat(), es.a_hat()),
        json!({
            "mean_ispe": mean(&ispe),
            "mean_mpd": mean(&mpd),
            "median_ispe": fofr_core::sim::quartiles(&ispe).median,
            "median_mpd": fofr_core::sim::quartiles(&mpd).median,
            "subjects": metrics,
        }),
    );
    if let Some(out) = &cfg.out {
        let rows: Vec<Vec<f64>> = metrics.iter().map(|m| vec![m.subject as f64, m.ispe, m.mpd, m.lambda]).collect();
        write_table_csv(&companion(out, "loo"), &["subject", "ispe", "mpd", "lambda"], &rows)?;
    }
    finish(cfg, &summary)
}
