//! Penalized function-on-function linear regression with bootstrap inference.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigen;
pub mod error;
pub mod estimator;
pub mod grid;
pub mod inference;
pub mod io;
pub mod loo;
pub mod metrics;
pub mod penalty;
pub mod sample;
pub mod sim;

pub use eigen::{cosine_basis, estimate_exponents, solve_eigensystem, EigenSystem, Exponents};
pub use estimator::{
    assemble_curve, assemble_surface, compute_scalar_scores, compute_scores, default_lambda_grid,
    default_truncation, fit, fit_coefficients, fit_scalar, fit_scalar_scores, fit_scores, gcv_score,
    hat_trace, ridge_solve, sample_multipliers, select_lambda, FittedModel, LambdaSelection,
    MultiplierWeights, RidgeFit, ScalarFit, ScoreDecomposition,
};
pub use error::{FofrError, Result};
pub use grid::{l2_inner, make_grid, Curve, Grid, Surface};
pub use loo::{loo_prediction_metrics, LooMetric};
pub use metrics::{metrics, v_form, ErrorMetrics};
pub use penalty::{penalty_operator, spectral_penalty, thin_plate_penalty};
pub use sample::{center_sample, empirical_covariance, CovarianceEstimate, FunctionalSample};
