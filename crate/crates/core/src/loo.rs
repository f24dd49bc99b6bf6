//! Leave-one-out prediction accuracy.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::solve_eigensystem;
use crate::error::{FofrError, Result};
use crate::estimator::{fit, LambdaSelection};
use crate::grid::Grid;
use crate::sample::{center_sample, empirical_covariance};

/// Prediction errors for one held-out subject.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LooMetric {
    pub subject: usize,
    /// `∫ (Y_i − Ŷ_i)²`.
    pub ispe: f64,
    /// `max_t |Y_i − Ŷ_i|`.
    pub mpd: f64,
    pub lambda: f64,
}

/// Refit without each subject in turn and score the prediction of that subject.
///
/// `x` and `y` are raw (uncentered) `n x G` matrices. Each fold is centered on
/// its own training means, and the prediction adds the training mean of `Y`
/// back: `Ŷ_i = Ȳ_{−i} + ∫ (X_i − X̄_{−i}) β̂_{−i}`.
pub fn loo_prediction_metrics(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    grid: &Grid,
    v: usize,
    selection: &LambdaSelection,
) -> Result<Vec<LooMetric>> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(FofrError::IncompatibleSamples { left: n, right: y.nrows() });
    }
    if n < 3 {
        return Err(FofrError::InsufficientSample { n, min: 3 });
    }
    let h = grid.weight();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let keep: Vec<usize> = (0..n).filter(|&k| k != i).collect();
            let run = || -> Result<LooMetric> {
                let xs = center_sample(&x.select_rows(keep.iter()), grid)?;
                let ys = center_sample(&y.select_rows(keep.iter()), grid)?;
                let es = Arc::new(solve_eigensystem(&empirical_covariance(&xs)?, v, grid)?);
                let fitted = fit(&xs, &ys, es, selection, None)?;
                let xi = x.row(i) - xs.mean().values.transpose();
                let pred = (xi * &fitted.beta_hat.values) * h + ys.mean().values.transpose();
                let resid = y.row(i) - pred;
                Ok(LooMetric {
                    subject: i,
                    ispe: h * resid.norm_squared(),
                    mpd: resid.amax(),
                    lambda: fitted.lambda,
                })
            };
            run().map_err(|e| FofrError::FitFailed {
                subject: i,
                source: Box::new(e),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Surface};
    use crate::sim::dgp_predictors_raw;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn predictors(n: usize, g: &Grid, seed: u64) -> DMatrix<f64> {
        dgp_predictors_raw(n, g, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn noiseless_in_span_recovery() {
        let g = make_grid(40).unwrap();
        let x = predictors(50, &g, 4);
        // smooth surface in the span of the leading cosines
        let beta = Surface::from_fn(&g, |s, t| 1.0 + (std::f64::consts::PI * s).cos() * (std::f64::consts::PI * t).cos());
        let y = &x * &beta.values * g.weight();
        let out = loo_prediction_metrics(&x, &y, &g, 5, &LambdaSelection::Fixed(1e-12)).unwrap();
        assert_eq!(out.len(), 50);
        for m in &out {
            assert!(m.ispe <= 1e-3, "subject {} ispe {}", m.subject, m.ispe);
        }
    }

    #[test]
    fn zero_response_gives_zero_error() {
        let g = make_grid(20).unwrap();
        let x = predictors(12, &g, 5);
        let y = DMatrix::zeros(12, 20);
        let out = loo_prediction_metrics(&x, &y, &g, 3, &LambdaSelection::Gcv).unwrap();
        assert!(out.iter().all(|m| m.ispe == 0.0 && m.mpd == 0.0));
    }

    #[test]
    fn duplicated_subjects_score_equally() {
        let g = make_grid(20).unwrap();
        let mut x = predictors(12, &g, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut y = crate::sim::dgp_predictors_raw(12, &g, &mut rng);
        let xr = x.row(0).into_owned();
        let yr = y.row(0).into_owned();
        x = x.insert_row(12, 0.0);
        y = y.insert_row(12, 0.0);
        x.set_row(12, &xr);
        y.set_row(12, &yr);
        let out = loo_prediction_metrics(&x, &y, &g, 3, &LambdaSelection::Fixed(1e-4)).unwrap();
        assert!((out[0].ispe - out[12].ispe).abs() <= 1e-10 * out[0].ispe.max(1.0));
        assert!((out[0].mpd - out[12].mpd).abs() <= 1e-10 * out[0].mpd.max(1.0));
    }

    #[test]
    fn failures_name_the_subject() {
        let g = make_grid(20).unwrap();
        let x = predictors(4, &g, 8);
        let y = x.clone();
        // three training curves cannot support five modes
        let err = loo_prediction_metrics(&x, &y, &g, 5, &LambdaSelection::Gcv).unwrap_err();
        assert!(matches!(err, FofrError::FitFailed { .. }));
        assert!(matches!(
            loo_prediction_metrics(&x.rows(0, 2).into_owned(), &y.rows(0, 2).into_owned(), &g, 1, &LambdaSelection::Gcv),
            Err(FofrError::InsufficientSample { n: 2, min: 3 })
        ));
    }
}
