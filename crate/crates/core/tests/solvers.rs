mod support;

use nalgebra::DVector;
use phaselab::lasso::{kkt_certificate, lambda_max};
use phaselab::{bp_solve, lasso_fit, perturbed_fit, BpStatus};
use proptest::prelude::*;
use support::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lasso_matches_enumeration(n in 2usize..9, p in 1usize..6, k in 0usize..6,
                                 lambda in 0.02f64..1.5, seed in 0u64..1_000_000) {
        let problem = isotropic_problem(n, p, k.min(p), lambda, seed);
        let fit = lasso_fit(&problem, 1e-12, 100_000).unwrap();
        prop_assert!(fit.converged);
        let oracle = lasso_by_sign_enumeration(&problem.x, &problem.y, problem.penalty(), None);
        prop_assert!((&fit.coefficients - &oracle).amax() <= 1e-7);
    }

    #[test]
    fn perturbed_matches_enumeration(n in 2usize..9, p in 1usize..6, mu in 0.05f64..1.0,
                                     seed in 0u64..1_000_000) {
        let problem = isotropic_problem(n, p, p / 2, 0.4, seed);
        let fit = perturbed_fit(&problem, &problem.b_star, mu, 1e-12, 100_000).unwrap();
        let metric = problem.covariance.matrix();
        let ridge = Ridge { weight: mu * n as f64, metric: &metric, reference: &problem.b_star };
        let oracle = lasso_by_sign_enumeration(&problem.x, &problem.y, problem.penalty(), Some(&ridge));
        prop_assert!((&fit.coefficients - &oracle).amax() <= 1e-7);
    }

    #[test]
    fn basis_pursuit_matches_lp(p in 3usize..6, n_frac in 0.2f64..0.95, k in 1usize..6,
                                seed in 0u64..1_000_000) {
        let n = ((p as f64 * n_frac).floor() as usize).clamp(1, p - 1);
        let problem = isotropic_problem(n, p, k.min(p), 0.5, seed);
        let bp = bp_solve(&problem.x, &problem.b_star, 1e-12).unwrap();
        let oracle = l1_min_by_vertex_enumeration(&problem.x, &(&problem.x * &problem.b_star));
        prop_assert!((bp.solution.abs().sum() - oracle).abs() <= 1e-6);
        if bp.status == BpStatus::Recovered {
            prop_assert!((problem.b_star.abs().sum() - oracle).abs() <= 1e-6);
        }
    }
}

#[test]
fn above_lambda_max_the_fit_is_zero() {
    let problem = isotropic_problem(50, 80, 5, 0.5, 3);
    let big = problem.with_lambda(lambda_max(&problem) * 1.01);
    let fit = lasso_fit(&big, 1e-10, 10_000).unwrap();
    assert_eq!(fit.df, 0);
    assert_eq!(fit.coefficients, DVector::zeros(80));
}

#[test]
fn desk_scale_fits_meet_the_kkt_tolerance() {
    for (n, p, k) in [(200, 400, 20), (400, 800, 280), (300, 300, 60)] {
        let problem = isotropic_problem(n, p, k, 0.5, n as u64);
        let fit = lasso_fit(&problem, 1e-9, 50_000).unwrap();
        assert!(fit.converged);
        assert!(kkt_certificate(&fit.coefficients, &problem) <= 1e-9 * problem.penalty());
        assert!(fit.df <= n);
    }
}
