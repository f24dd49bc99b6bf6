//! Bootstrap inference for the fitted slope.
//!
//! Every procedure works with the unscaled deviations `β̂*_q − β̂`. The rate
//! factor `√n λ^{(2a+1)/(4D)}` is kept on the ensemble for reporting, and it
//! cancels from every band and threshold.

pub mod bootstrap;
pub mod hypothesis;

pub use bootstrap::{
    bootstrap_ensemble, bootstrap_scalar, bootstrap_with_weights, empirical_quantile,
    pointwise_interval, prediction_band, rate_factor, scalar_exponents, sigma_tau,
    simultaneous_region, BandResult, BootstrapEnsemble, ScalarEnsemble, DEFAULT_REPLICATES,
};
pub use hypothesis::{
    classical_test_bt, default_cutoff_constant, extremal_sets, penalized_objective, plrt,
    plrt_moments, plrt_zero_statistic, relevant_test, relevant_test_scalar, ExtremalMasks,
    TestKind, TestResult,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::solve_eigensystem;
    use crate::estimator::{fit, fit_scalar, LambdaSelection, MultiplierWeights};
    use crate::error::FofrError;
    use crate::grid::{make_grid, Curve, Grid, Surface};
    use crate::sample::{center_sample, empirical_covariance, FunctionalSample};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::{PI, SQRT_2};
    use std::sync::Arc;

    struct Fixture {
        grid: Grid,
        x: FunctionalSample,
        y: FunctionalSample,
        fitted: crate::estimator::FittedModel,
    }

    fn fixture(n: usize, seed: u64) -> Fixture {
        let g = 30;
        let grid = make_grid(g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut raw = DMatrix::zeros(n, g);
        for i in 0..n {
            for j in 1..=15 {
                let z: f64 = rng.random_range(-3f64.sqrt()..3f64.sqrt());
                for (p, &s) in grid.points().iter().enumerate() {
                    let f = if j == 1 { 1.0 } else { SQRT_2 * ((j - 1) as f64 * PI * s).cos() };
                    raw[(i, p)] += z * f / j as f64;
                }
            }
        }
        let x = center_sample(&raw, &grid).unwrap();
        let beta = Surface::from_fn(&grid, |s, t| (-(s + t)).exp());
        let h = grid.weight();
        let signal = x.data() * &beta.values * h;
        let noise = DMatrix::from_fn(n, g, |_, _| 0.05 * rng.sample::<f64, _>(StandardNormal));
        let y = center_sample(&(signal + noise), &grid).unwrap();
        let es = Arc::new(solve_eigensystem(&empirical_covariance(&x).unwrap(), 3, &grid).unwrap());
        let fitted = fit(&x, &y, es, &LambdaSelection::Gcv, None).unwrap();
        Fixture { grid, x, y, fitted }
    }

    #[test]
    fn quantile_convention() {
        assert_eq!(empirical_quantile(&[3.0, 1.0], 0.5).unwrap(), 3.0);
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(empirical_quantile(&v, 0.05).unwrap(), 96.0);
        assert!(matches!(
            empirical_quantile(&v[..10], 0.05),
            Err(FofrError::QuantileUnstable { q: 10, min: 20 })
        ));
        let mut last = f64::INFINITY;
        for a in [0.01, 0.05, 0.1, 0.2, 0.5, 0.9] {
            let q = empirical_quantile(&v, a).unwrap();
            assert!(q <= last);
            last = q;
        }
        assert!(empirical_quantile(&v, 0.0).is_err());
    }

    #[test]
    fn unit_weights_give_zero_process() {
        let f = fixture(40, 1);
        let e = bootstrap_with_weights(&f.fitted, &[MultiplierWeights::ones(40)], 0, &LambdaSelection::Gcv).unwrap();
        assert_eq!(e.q(), 1);
        assert!(e.process(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ensemble_is_deterministic() {
        let f = fixture(40, 2);
        let a = bootstrap_ensemble(&f.fitted, 25, 11, &LambdaSelection::Gcv).unwrap();
        let b = bootstrap_ensemble(&f.fitted, 25, 11, &LambdaSelection::Gcv).unwrap();
        assert_eq!(a.deviations, b.deviations);
        assert_eq!(a.lambdas, b.lambdas);
        let c = bootstrap_ensemble(&f.fitted, 25, 12, &LambdaSelection::Gcv).unwrap();
        assert_ne!(a.deviations, c.deviations);
        assert!(a.scale > 0.0);
        assert!((a.process(3) - &a.deviations[3] * a.scale).amax() == 0.0);
    }

    #[test]
    fn zero_ensemble_gives_zero_width() {
        let f = fixture(40, 3);
        let e = BootstrapEnsemble {
            seed: 0,
            scale: 1.0,
            deviations: vec![DMatrix::zeros(30, 30); 20],
            lambdas: vec![f.fitted.lambda; 20],
        };
        let band = simultaneous_region(&e, &f.fitted, 0.05).unwrap();
        assert_eq!(band.half_width, 0.0);
        assert_eq!(band.lower, band.upper);
        assert_eq!(band.center, f.fitted.beta_hat);
    }

    #[test]
    fn band_nesting_and_duality() {
        let f = fixture(40, 4);
        let e = bootstrap_ensemble(&f.fitted, 100, 5, &LambdaSelection::Gcv).unwrap();
        let wide = simultaneous_region(&e, &f.fitted, 0.05).unwrap();
        let narrow = simultaneous_region(&e, &f.fitted, 0.2).unwrap();
        assert!(wide.half_width >= narrow.half_width);
        assert!(wide.lower.values.iter().zip(narrow.lower.values.iter()).all(|(a, b)| a <= b));
        assert!(wide.upper.values.iter().zip(narrow.upper.values.iter()).all(|(a, b)| a >= b));
        // band is equal width
        let width = &wide.upper.values - &wide.lower.values;
        assert!((width.max() - width.min()).abs() < 1e-12);

        let r = classical_test_bt(&f.fitted.beta_hat, &wide).unwrap();
        assert!(!r.reject);
        let outside = Surface {
            grid: f.grid.clone(),
            values: wide.upper.values.add_scalar(1.0),
        };
        let r = classical_test_bt(&outside, &wide).unwrap();
        assert!(r.reject);
        assert!((r.statistic - 1.0).abs() < 1e-12);
        for shift in [0.0, 0.5, 0.9, 1.1, 2.0] {
            let star = Surface {
                grid: f.grid.clone(),
                values: f.fitted.beta_hat.values.map(|b| b + shift * wide.half_width * (b * 7.0).sin()),
            };
            let r = classical_test_bt(&star, &wide).unwrap();
            let md = (&star.values - &f.fitted.beta_hat.values).amax();
            assert_eq!(r.reject, md > wide.half_width);
            assert_eq!(r.reject, r.statistic > r.threshold);
        }
    }

    #[test]
    fn decisions_ignore_scale() {
        let f = fixture(40, 5);
        let e = bootstrap_ensemble(&f.fitted, 60, 3, &LambdaSelection::Gcv).unwrap();
        let zero = Surface::zeros(&f.grid);
        let masks = extremal_sets(&f.fitted, &zero, None).unwrap();
        for c in [1e-3, 1.0, 1e4] {
            let e2 = e.with_scale(e.scale * c);
            let b1 = simultaneous_region(&e, &f.fitted, 0.1).unwrap();
            let b2 = simultaneous_region(&e2, &f.fitted, 0.1).unwrap();
            assert_eq!(b1.lower, b2.lower);
            assert_eq!(b1.upper, b2.upper);
            for delta in [0.0, 0.5, 1.0] {
                let r1 = relevant_test(delta, 0.1, &e, &masks).unwrap();
                let r2 = relevant_test(delta, 0.1, &e2, &masks).unwrap();
                assert_eq!(r1.reject, r2.reject);
                assert_eq!(r1.threshold, r2.threshold);
            }
        }
        // the scaled quantile is exactly the raw one times the rate factor
        let band = simultaneous_region(&e, &f.fitted, 0.1).unwrap();
        let scaled: Vec<f64> = (0..e.q()).map(|q| e.process(q).amax()).collect();
        let direct = empirical_quantile(&scaled, 0.1).unwrap();
        assert!((direct - band.quantile).abs() <= 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn pointwise_limits() {
        let f = fixture(40, 6);
        let (lo, hi) = pointwise_interval(&f.fitted, 3, 4, 1.0, 1.0).unwrap();
        assert_eq!(lo, hi);
        assert_eq!(lo, f.fitted.beta_hat.values[(3, 4)]);
        let es = &f.fitted.eigensystem;
        // heavy smoothing keeps only the unpenalized modes
        let mut null_part = 0.0;
        for l in 1..=es.v() {
            for k in 0..es.v() {
                if es.rho()[(k, l - 1)] == 0.0 {
                    null_part += (es.modes(l)[(7, k)] * es.eta(l).values[2]).powi(2);
                }
            }
        }
        assert!((sigma_tau(es, 1e30, 7, 2) - null_part.sqrt()).abs() < 1e-9);
        let (lo, hi) = pointwise_interval(&f.fitted, 7, 2, 0.05, 1.0).unwrap();
        let z = 1.959963984540054;
        let expect = z * sigma_tau(es, f.fitted.lambda, 7, 2) / 40f64.sqrt();
        assert!(((hi - lo) / 2.0 - expect).abs() < 1e-9);
    }

    #[test]
    fn plrt_properties() {
        let f = fixture(40, 7);
        let r = plrt(&f.fitted.beta_hat, &f.x, &f.y, &f.fitted, 0.05).unwrap();
        let u = r.diagnostics["u_n"];
        assert!(r.diagnostics["likelihood_ratio"].abs() < 1e-12);
        assert!((r.statistic + u / (2.0 * u).sqrt()).abs() < 1e-6);
        assert!(!r.reject);

        let zero = Surface::zeros(&f.grid);
        let r0 = plrt(&zero, &f.x, &f.y, &f.fitted, 0.05).unwrap();
        let closed = plrt_zero_statistic(&f.fitted).unwrap();
        let quad = r0.diagnostics["likelihood_ratio"];
        assert!((closed - quad).abs() <= 0.01 * closed.abs(), "{closed} vs {quad}");
        assert!(r0.reject);

        let (u, s2) = plrt_moments(&DMatrix::zeros(4, 4), 3.0);
        assert!((u - 16.0).abs() < 1e-12);
        assert!((s2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extremal_mask_cases() {
        let diff = vec![5.0; 16];
        let m = ExtremalMasks::from_difference(&diff, 0.3);
        assert!(m.plus.iter().all(|&b| b));
        assert!(m.minus.iter().all(|&b| !b));
        let mixed = vec![1.0, -2.0, 0.5, 1.9];
        let m = ExtremalMasks::from_difference(&mixed, 1e6);
        assert!(m.plus.iter().all(|&b| b) && m.minus.iter().all(|&b| b));
        let m = ExtremalMasks::from_difference(&mixed, 0.2);
        assert_eq!(m.plus, vec![false, false, false, true]);
        assert_eq!(m.minus, vec![false, true, false, false]);
        assert_eq!(m.dhat, 2.0);

        let f = fixture(40, 8);
        let zero = Surface::zeros(&f.grid);
        let m = extremal_sets(&f.fitted, &zero, None).unwrap();
        let c = f.fitted.beta_hat.max_abs() / 4.0;
        assert!((m.cutoff - c * 40f64.ln() / 40f64.sqrt()).abs() < 1e-12);
        assert!(extremal_sets(&f.fitted, &zero, Some(0.0)).is_err());
    }

    #[test]
    fn relevant_degenerate_cases() {
        let f = fixture(40, 9);
        let e = bootstrap_ensemble(&f.fitted, 60, 2, &LambdaSelection::Gcv).unwrap();
        let full = ExtremalMasks {
            plus: vec![true; 900],
            minus: vec![true; 900],
            cutoff: 0.0,
            dhat: 0.0,
        };
        let r = relevant_test(0.0, 0.05, &e, &full).unwrap();
        assert!(!r.reject);
        let band = simultaneous_region(&e, &f.fitted, 0.05).unwrap();
        assert!(r.diagnostics["quantile"] <= band.half_width);
        let zero = Surface::zeros(&f.grid);
        let masks = extremal_sets(&f.fitted, &zero, None).unwrap();
        assert!(!relevant_test(1e9, 0.05, &e, &masks).unwrap().reject);
        assert!(relevant_test(0.0, 0.05, &e, &masks).unwrap().reject);
        let empty = ExtremalMasks {
            plus: vec![false; 900],
            minus: vec![false; 900],
            cutoff: 0.0,
            dhat: 0.0,
        };
        assert!(matches!(relevant_test(0.0, 0.05, &e, &empty), Err(FofrError::InvalidMasks)));
    }

    #[test]
    fn prediction_band_identities() {
        let f = fixture(40, 10);
        let e = bootstrap_ensemble(&f.fitted, 40, 8, &LambdaSelection::Gcv).unwrap();
        let zero = Curve::zeros(&f.grid);
        let b = prediction_band(&zero, &f.fitted, &e, 0.1).unwrap();
        assert_eq!(b.half_width, 0.0);
        assert!(b.center.values.iter().all(|&v| v == 0.0));

        let es = &f.fitted.eigensystem;
        let x11 = es.x_hat(1, 1);
        let b = prediction_band(&x11, &f.fitted, &e, 0.1).unwrap();
        // μ̂(t) = Σ_{k,l} b̂_kl ⟨x̂_11, x̂_kl⟩ η_l(t)
        let h = f.grid.weight();
        for (j, &mu) in b.center.values.iter().enumerate() {
            let mut direct = 0.0;
            for l in 1..=es.v() {
                for k in 1..=es.v() {
                    let ip = h * x11.values.dot(&es.x_hat(k, l).values);
                    direct += f.fitted.coeffs[(k - 1, l - 1)] * ip * es.eta(l).values[j];
                }
            }
            assert!((mu - direct).abs() < 1e-10);
        }
        let sups: Vec<f64> = e.deviations.iter().map(|d| (d.tr_mul(&x11.values) * h).amax()).collect();
        assert_eq!(b.half_width, empirical_quantile(&sups, 0.1).unwrap());
        assert!((b.quantile - b.half_width * e.scale).abs() < 1e-12 * b.quantile.max(1.0));
    }

    #[test]
    fn scalar_relevant_matches_surface_embedding() {
        let f = fixture(50, 11);
        let y = f.x.data() * Curve::from_fn(&f.grid, |s| (2.0 * s).sin()).values * f.grid.weight();
        let y = &y - DVector::from_element(50, y.mean());
        let fit = fit_scalar(&f.x, &y, f.fitted.eigensystem.clone(), &LambdaSelection::Gcv, None).unwrap();
        let ens = bootstrap_scalar(&fit, 60, 4, &LambdaSelection::Gcv).unwrap();
        let zero = Curve::zeros(&f.grid);
        let same = relevant_test_scalar(&fit.beta_hat, &fit, 0.0, 0.05, &ens, None).unwrap();
        assert!(!same.reject);
        assert!(!relevant_test_scalar(&zero, &fit, 1e9, 0.05, &ens, None).unwrap().reject);

        // constant-in-t embedding gives the same masks and decisions
        let g = f.grid.size();
        let c = fit.beta_hat.max_abs() / 4.0;
        let cut = c * 50f64.ln() / 50f64.sqrt();
        let surf_diff = DMatrix::from_fn(g, g, |i, _| fit.beta_hat.values[i]);
        let masks = ExtremalMasks::from_difference(surf_diff.as_slice(), cut);
        let embedded = BootstrapEnsemble {
            seed: ens.seed,
            scale: ens.scale,
            deviations: ens.deviations.iter().map(|d| DMatrix::from_fn(g, g, |i, _| d[i])).collect(),
            lambdas: ens.lambdas.clone(),
        };
        for delta in [0.0, 0.2, 0.5, 1.0, 2.0] {
            let a = relevant_test_scalar(&zero, &fit, delta, 0.05, &ens, None).unwrap();
            let b = relevant_test(delta, 0.05, &embedded, &masks).unwrap();
            assert_eq!(a.reject, b.reject);
            assert_eq!(a.threshold, b.threshold);
        }
    }
}
