//! Quantities computed on a fitted instance: risk, sparsity, GCV, the
//! one-sided residual gap, proof-event indicators and the inequalities that
//! hold deterministically at any Lasso minimizer.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lasso::{LassoFit, LassoSolver, PerturbedFit};
use crate::linalg::{op_norm, op_norm_exact, power_iteration_norm, select_columns};
use crate::problem::RegressionProblem;

/// `μ = n^{-1/8}`
pub fn default_mu(n: usize) -> f64 {
    (n as f64).powf(-0.125)
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsReport {
    /// `‖Σ^{1/2}(b̂ − b*)‖²`
    pub risk: f64,
    pub l2_error: f64,
    pub df: usize,
    /// `df / n`
    pub support_fraction: f64,
    /// `‖y − Xb̂‖/√n`
    pub residual_norm: f64,
    /// `residual_norm² / (1 − df/n)²`; infinite when `df ≥ n`
    pub gcv: f64,
    pub gcv_defined: bool,
    pub lemma1_gap: f64,
    pub mu_used: f64,
    /// `‖ε‖ ≤ 2σ√n`
    pub event_chi2: bool,
    /// `‖XΣ^{-1/2}‖_op ≤ √n(2 + √γ)`
    pub event_opnorm: bool,
    /// `‖XΣ^{-1/2}‖_op / √n` by power iteration
    pub whitened_opnorm: f64,
}

pub fn diagnose(problem: &RegressionProblem, fit: &LassoFit) -> DiagnosticsReport {
    diagnose_with(problem, fit, None)
}

/// As [`diagnose`], with `μ` overridden for sensitivity studies.
pub fn diagnose_with(
    problem: &RegressionProblem,
    fit: &LassoFit,
    mu: Option<f64>,
) -> DiagnosticsReport {
    let n = problem.n();
    let nf = n as f64;
    let sigma = problem.config.sigma;
    let mu = mu.unwrap_or_else(|| default_mu(n));
    let h = &fit.coefficients - &problem.b_star;
    let risk = problem.sigma_norm_sq(&h);
    let residual_norm = (&problem.y - &problem.x * &fit.coefficients).norm() / nf.sqrt();
    let support_fraction = fit.df as f64 / nf;
    let dof_slack = 1.0 - support_fraction;
    let gcv_defined = fit.df < n;
    let gcv = if gcv_defined {
        residual_norm * residual_norm / (dof_slack * dof_slack)
    } else {
        f64::INFINITY
    };
    let scale = sigma * sigma + risk;
    let ratio = if residual_norm == 0.0 { 0.0 } else { residual_norm / scale.sqrt() };
    let penalty_term = if risk == 0.0 { 0.0 } else { mu.sqrt() * risk / (2.0 * sigma * sigma) };
    let lemma1_gap = ratio - dof_slack - penalty_term;

    let whitened = problem.covariance.whiten_design(&problem.x);
    let whitened_opnorm = op_norm(&whitened, 200, 1e-8) / nf.sqrt();
    let gamma = problem.config.gamma;
    DiagnosticsReport {
        risk,
        l2_error: h.norm(),
        df: fit.df,
        support_fraction,
        residual_norm,
        gcv,
        gcv_defined,
        lemma1_gap,
        mu_used: mu,
        event_chi2: problem.noise.norm() <= 2.0 * sigma * nf.sqrt(),
        event_opnorm: whitened_opnorm <= 2.0 + gamma.sqrt(),
        whitened_opnorm,
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SparsityFloor {
    /// `λ√(df/n) / (√κ(2+√γ)√(σ²+R)) − (1 − df/n)`
    pub lhs: f64,
    /// `2n^{-1/32}`
    pub threshold: f64,
    pub holds: bool,
    /// `−lhs`
    pub margin: f64,
    /// Lower bound on `1 − df/n` implied by the inequality, when `df/n ≥ ½`.
    pub implied_floor: Option<f64>,
}

pub fn sparsity_floor_check(
    problem: &RegressionProblem,
    report: &DiagnosticsReport,
) -> SparsityFloor {
    let n = problem.n() as f64;
    let cfg = &problem.config;
    let denom = problem.covariance.kappa().sqrt()
        * (2.0 + cfg.gamma.sqrt())
        * (cfg.sigma * cfg.sigma + report.risk).sqrt();
    let frac = report.support_fraction;
    let lead = cfg.lambda / denom;
    let lhs = lead * frac.sqrt() - (1.0 - frac);
    let threshold = 2.0 * n.powf(-1.0 / 32.0);
    SparsityFloor {
        lhs,
        threshold,
        holds: lhs <= threshold,
        margin: -lhs,
        implied_floor: (frac >= 0.5).then(|| lead * 0.5f64.sqrt() - threshold),
    }
}

/// `nλ²df ≤ ‖y − Xb̂‖²‖X_A‖²_op`, a consequence of the KKT conditions on
/// the active set `A`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct KktSparsity {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs ≤ rhs`, allowing the relative slack the solver tolerance permits.
    pub holds: bool,
    /// The same with `‖X_A‖²_op` replaced by its high-probability bound
    /// `κn(2+√γ)²`.
    pub event_rhs: f64,
}

pub fn kkt_sparsity_check(problem: &RegressionProblem, fit: &LassoFit) -> KktSparsity {
    let n = problem.n() as f64;
    let cfg = &problem.config;
    let lhs = n * cfg.lambda * cfg.lambda * fit.df as f64;
    let resid_sq = (&problem.y - &problem.x * &fit.coefficients).norm_squared();
    // |X_jᵀr| ≥ (1 − tol)λ√n on the active set
    let slack = 1.0 / (1.0 - fit.tol).powi(2) + 1e-12;
    let xa = select_columns(&problem.x, &fit.active_set);
    let mut norm = power_iteration_norm(xa.ncols(), 200, 1e-10, |v| xa.tr_mul(&(&xa * v)));
    if lhs > resid_sq * norm * norm * slack {
        norm = op_norm_exact(&xa);
    }
    let rhs = resid_sq * norm * norm;
    KktSparsity {
        lhs,
        rhs,
        holds: lhs <= rhs * slack,
        event_rhs: resid_sq * problem.covariance.kappa() * n * (2.0 + cfg.gamma.sqrt()).powi(2),
    }
}

/// The two inequalities relating the Lasso to its perturbed version.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PerturbationCheck {
    pub mu: f64,
    pub risk_lasso: f64,
    pub risk_perturbed: f64,
    /// `‖X(b̂ − b^μ)‖²`
    pub fit_gap: f64,
    /// `μnR`
    pub fit_gap_bound: f64,
}

impl PerturbationCheck {
    pub fn holds(&self, abs_tol: f64) -> bool {
        self.risk_perturbed <= self.risk_lasso + abs_tol
            && self.fit_gap <= self.fit_gap_bound + abs_tol
    }
}

pub fn perturbation_check(
    problem: &RegressionProblem,
    fit: &LassoFit,
    perturbed: &PerturbedFit,
) -> PerturbationCheck {
    let risk_lasso = problem.sigma_norm_sq(&(&fit.coefficients - &problem.b_star));
    PerturbationCheck {
        mu: perturbed.mu,
        risk_lasso,
        risk_perturbed: problem.sigma_norm_sq(&(&perturbed.coefficients - &problem.b_star)),
        fit_gap: (&problem.x * (&fit.coefficients - &perturbed.coefficients)).norm_squared(),
        fit_gap_bound: perturbed.mu * problem.n() as f64 * risk_lasso,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub df: usize,
    pub support_fraction: f64,
    pub risk: f64,
    pub keep: bool,
    pub converged: bool,
}

/// Fits a decreasing `λ` path with warm starts and marks the points whose
/// support fraction exceeds `threshold` as discardable.
pub fn lambda_path_screen(
    problem: &RegressionProblem,
    lambdas: &[f64],
    threshold: f64,
) -> Result<Vec<PathPoint>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidConfig(format!("threshold must lie in (0, 1], got {threshold}")));
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::InvalidConfig("lambdas must be positive and finite".into()));
    }
    if lambdas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidConfig("lambdas must be sorted decreasing".into()));
    }
    let solver = LassoSolver::default();
    let n = problem.n() as f64;
    let mut warm: Option<DVector<f64>> = None;
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let instance = problem.with_lambda(lambda);
        let fit = solver.fit_from(&instance, warm.as_ref())?;
        let support_fraction = fit.df as f64 / n;
        out.push(PathPoint {
            lambda,
            df: fit.df,
            support_fraction,
            risk: problem.sigma_norm_sq(&(&fit.coefficients - &problem.b_star)),
            keep: support_fraction <= threshold,
            converged: fit.converged,
        });
        warm = Some(fit.coefficients);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lasso::lambda_max;
    use crate::problem::{sample_problem, sample_sign_pattern, ProblemConfig};

    fn instance(n: usize, p: usize, k: usize, lambda: f64, seed: u64) -> RegressionProblem {
        let cfg = ProblemConfig::isotropic(n, p, 1.0, lambda, seed);
        let pattern = sample_sign_pattern(p, k, seed).unwrap();
        sample_problem(&cfg, &pattern, 1.0).unwrap()
    }

    #[test]
    fn exact_noiseless_fit() {
        let problem = instance(30, 40, 3, 0.5, 1).noiseless();
        let mut fit = LassoSolver::default().fit(&problem).unwrap();
        fit.coefficients = problem.b_star.clone();
        fit.df = 3;
        let r = diagnose(&problem, &fit);
        assert_eq!(r.risk, 0.0);
        assert_eq!(r.residual_norm, 0.0);
        assert!((r.lemma1_gap + (1.0 - 0.1)).abs() < 1e-15);
    }

    #[test]
    fn zero_fit_at_large_lambda() {
        let base = instance(30, 40, 3, 0.5, 2);
        let problem = base.with_lambda(lambda_max(&base) * 1.01);
        let fit = LassoSolver::default().fit(&problem).unwrap();
        let r = diagnose(&problem, &fit);
        assert_eq!(r.support_fraction, 0.0);
        assert!((r.gcv - problem.y.norm_squared() / 30.0).abs() < 1e-12 * r.gcv);
        let floor = sparsity_floor_check(&problem, &r);
        assert!(floor.holds);
        assert_eq!(floor.margin, 1.0);
        assert!(floor.implied_floor.is_none());
    }

    #[test]
    fn gcv_dominates_residual_and_flags_dense_fits() {
        let problem = instance(40, 80, 4, 0.3, 3);
        let mut fit = LassoSolver::default().fit(&problem).unwrap();
        let r = diagnose(&problem, &fit);
        assert!(r.gcv >= r.residual_norm.powi(2));
        assert_eq!(r.support_fraction * 40.0, fit.df as f64);
        fit.df = 40;
        let dense = diagnose(&problem, &fit);
        assert!(!dense.gcv_defined && dense.gcv.is_infinite());
    }

    #[test]
    fn gap_is_scale_invariant() {
        let problem = instance(50, 60, 5, 0.5, 4);
        let fit = LassoSolver::default().fit(&problem).unwrap();
        let r = diagnose(&problem, &fit);
        let c = 2.0;
        let mut scaled = problem.clone();
        scaled.y *= c;
        scaled.b_star *= c;
        scaled.noise *= c;
        scaled.config.sigma *= c;
        scaled.config.lambda *= c;
        let fit2 = LassoSolver::default().fit(&scaled).unwrap();
        let r2 = diagnose(&scaled, &fit2);
        assert!((r.lemma1_gap - r2.lemma1_gap).abs() < 1e-8);
    }

    #[test]
    fn kkt_sparsity_holds() {
        for seed in 0..10 {
            let problem = instance(30, 50, 4, 0.2, seed);
            let fit = LassoSolver::default().fit(&problem).unwrap();
            let check = kkt_sparsity_check(&problem, &fit);
            assert!(check.holds, "{check:?}");
        }
    }

    #[test]
    fn path_screen_rules() {
        let problem = instance(40, 60, 4, 0.5, 5);
        let top = lambda_max(&problem);
        let lambdas: Vec<f64> = (0..8).map(|i| top * 0.6f64.powi(i)).collect();
        let path = lambda_path_screen(&problem, &lambdas, 1.0).unwrap();
        assert_eq!(path[0].df, 0);
        assert!(path.iter().all(|pt| pt.keep));
        let strict = lambda_path_screen(&problem, &lambdas, 0.3).unwrap();
        assert!(strict.iter().all(|pt| pt.keep == (pt.support_fraction <= 0.3)));
        assert!(lambda_path_screen(&problem, &[0.1, 0.2], 0.5).is_err());
        assert!(lambda_path_screen(&problem, &lambdas, 0.0).is_err());
    }
}
