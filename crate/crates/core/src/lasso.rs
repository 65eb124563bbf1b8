//! Lasso and its quadratically perturbed variant, by cyclic coordinate
//! descent with soft-thresholding.
//!
//! Both problems are instances of
//!
//! ```text
//! ½‖Xb − y‖² + (μn/2)(b − b_ref)ᵀ Σ (b − b_ref) + λ√n ‖b‖₁
//! ```
//!
//! with `μ = 0` for the plain Lasso. The solver sweeps all coordinates, then
//! iterates on the current support until it settles, then tries to solve the
//! smooth problem on that signed support exactly. A fit is accepted only once
//! the KKT residual `max_j dist(c_j, λ√n ∂|b_j|)` (with `c` the negative
//! gradient of the smooth part) is below `tol · λ√n`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::homotopy::{solve_path, Quadratic};
use crate::linalg::{l1_norm, soft_threshold};
use crate::problem::RegressionProblem;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_ACTIVE_ETA: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct LassoFit {
    pub coefficients: DVector<f64>,
    pub active_set: Vec<usize>,
    pub df: usize,
    pub kkt_residual: f64,
    pub objective: f64,
    /// Coordinate sweeps performed (full and support-restricted).
    pub iterations: usize,
    pub converged: bool,
    /// More active coefficients than `min(n, p)`: the solution is not unique
    /// and the reported one is simply where descent stopped.
    pub degenerate: bool,
    /// Relative KKT tolerance the fit was run with.
    pub tol: f64,
    /// `λ√n`
    pub penalty: f64,
    /// Objective after every sweep, when requested.
    pub objective_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbedFit {
    pub coefficients: DVector<f64>,
    pub mu: f64,
    pub active_set: Vec<usize>,
    pub df: usize,
    pub kkt_residual: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Summary record; coefficients only on request.
#[derive(Clone, Debug, Serialize)]
pub struct FitRecord {
    pub df: usize,
    pub kkt_residual: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub degenerate: bool,
    pub penalty: f64,
    pub active_set: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

impl LassoFit {
    pub fn record(&self, with_coefficients: bool) -> FitRecord {
        FitRecord {
            df: self.df,
            kkt_residual: self.kkt_residual,
            objective: self.objective,
            iterations: self.iterations,
            converged: self.converged,
            degenerate: self.degenerate,
            penalty: self.penalty,
            active_set: self.active_set.clone(),
            coefficients: with_coefficients.then(|| self.coefficients.iter().copied().collect()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LassoSolver {
    pub tol: f64,
    /// `None` means `100 · p`.
    pub max_sweeps: Option<usize>,
    pub active_eta: f64,
    pub record_trace: bool,
    /// Sweeps after which an unconverged descent is handed to the exact
    /// ℓ1 path solver; `None` disables the hand-off.
    pub path_after: Option<usize>,
}

impl Default for LassoSolver {
    fn default() -> Self {
        LassoSolver {
            tol: DEFAULT_TOL,
            max_sweeps: None,
            active_eta: DEFAULT_ACTIVE_ETA,
            record_trace: false,
            path_after: Some(300),
        }
    }
}

struct Perturbation<'a> {
    /// `μ n`
    weight: f64,
    b_ref: &'a DVector<f64>,
    sigma: Option<&'a DMatrix<f64>>,
}

struct Outcome {
    b: DVector<f64>,
    kkt: f64,
    objective: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

impl LassoSolver {
    pub fn with_tol(tol: f64) -> Self {
        LassoSolver {
            tol,
            ..Self::default()
        }
    }

    pub fn max_sweeps(mut self, sweeps: usize) -> Self {
        self.max_sweeps = Some(sweeps);
        self
    }

    pub fn record_trace(mut self, on: bool) -> Self {
        self.record_trace = on;
        self
    }

    fn check(&self, problem: &RegressionProblem, init: Option<&DVector<f64>>) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if let Some(b) = init {
            if b.len() != problem.p() {
                return Err(Error::DimensionMismatch {
                    what: "warm start",
                    expected: problem.p(),
                    got: b.len(),
                });
            }
        }
        Ok(())
    }

    pub fn fit(&self, problem: &RegressionProblem) -> Result<LassoFit> {
        self.fit_from(problem, None)
    }

    /// Lasso started from `init` (warm start along λ or signal paths).
    pub fn fit_from(
        &self,
        problem: &RegressionProblem,
        init: Option<&DVector<f64>>,
    ) -> Result<LassoFit> {
        self.check(problem, init)?;
        let penalty = problem.penalty();
        let out = self.solve(&problem.x, &problem.y, penalty, None, init);
        let active_set = active_set_of(
            &out.b,
            &correlations(&problem.x, &problem.y, &out.b, None),
            penalty,
            self.tol,
            self.active_eta,
        );
        let df = active_set.len();
        Ok(LassoFit {
            degenerate: df > problem.n().min(problem.p()),
            coefficients: out.b,
            active_set,
            df,
            kkt_residual: out.kkt,
            objective: out.objective,
            iterations: out.iterations,
            converged: out.converged,
            tol: self.tol,
            penalty,
            objective_trace: out.trace,
        })
    }

    /// Minimizer of `L_μ(b) = ½‖Xb−y‖² + λ√n‖b‖₁ + (μn/2)‖Σ^{1/2}(b − b_ref)‖²`.
    pub fn fit_perturbed(
        &self,
        problem: &RegressionProblem,
        b_ref: &DVector<f64>,
        mu: f64,
        init: Option<&DVector<f64>>,
    ) -> Result<PerturbedFit> {
        self.check(problem, init)?;
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::InvalidConfig(format!("mu must lie in (0, 1], got {mu}")));
        }
        if b_ref.len() != problem.p() {
            return Err(Error::DimensionMismatch {
                what: "reference vector",
                expected: problem.p(),
                got: b_ref.len(),
            });
        }
        let penalty = problem.penalty();
        let pert = Perturbation {
            weight: mu * problem.n() as f64,
            b_ref,
            sigma: problem.covariance.dense_sigma(),
        };
        let out = self.solve(&problem.x, &problem.y, penalty, Some(&pert), init);
        let corr = correlations(&problem.x, &problem.y, &out.b, Some(&pert));
        let active_set = active_set_of(&out.b, &corr, penalty, self.tol, self.active_eta);
        Ok(PerturbedFit {
            df: active_set.len(),
            coefficients: out.b,
            mu,
            active_set,
            kkt_residual: out.kkt,
            objective: out.objective,
            iterations: out.iterations,
            converged: out.converged,
        })
    }

    fn solve(
        &self,
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        penalty: f64,
        pert: Option<&Perturbation<'_>>,
        init: Option<&DVector<f64>>,
    ) -> Outcome {
        let p = x.ncols();
        let max_sweeps = self.max_sweeps.unwrap_or(100 * p.max(1));
        let mut state = CdState::new(x, y, penalty, pert, init);
        let target = self.tol * penalty;
        let mut trace = Vec::new();
        let mut iterations = 0;
        let mut inner_tol = (1e-3 * penalty).max(target);
        let mut last_polish: Option<Vec<(usize, bool)>> = None;
        let all: Vec<usize> = (0..p).collect();
        // support sweeps with an unchanged signed support before an exact solve
        let mut window = 16;
        let mut path_tried = self.path_after.is_none();

        loop {
            state.sweep(&all);
            iterations += 1;
            if self.record_trace {
                trace.push(state.objective());
            }
            let mut signed = state.signed_support();
            let mut stable = 0;
            while iterations < max_sweeps {
                let support = state.support();
                let moved = state.sweep(&support);
                iterations += 1;
                if self.record_trace {
                    trace.push(state.objective());
                }
                if moved <= inner_tol {
                    break;
                }
                let now = state.signed_support();
                if now == signed {
                    stable += 1;
                } else {
                    signed = now;
                    stable = 0;
                }
                if stable >= window && last_polish.as_ref() != Some(&signed) {
                    break;
                }
            }
            let signed = state.signed_support();
            if last_polish.as_ref() != Some(&signed) {
                if state.polish(&signed) && self.record_trace {
                    trace.push(state.objective());
                }
                last_polish = Some(signed);
                window *= 2;
            }
            let mut kkt = state.kkt_residual();
            if kkt > target && !path_tried && iterations >= self.path_after.unwrap_or(0) {
                path_tried = true;
                let quad = Quadratic {
                    x,
                    y,
                    ridge: pert.map(|pt| (pt.weight, pt.sigma, pt.b_ref)),
                };
                if let Some(b) = solve_path(&quad, penalty, 20 * (x.nrows() + p)) {
                    let before = state.objective();
                    let saved = state.b.clone();
                    state.reset(b);
                    if state.objective() > before {
                        state.reset(saved);
                    } else {
                        let signed = state.signed_support();
                        state.polish(&signed);
                        last_polish = Some(signed);
                    }
                    kkt = state.kkt_residual();
                }
            }
            if kkt <= target || iterations >= max_sweeps {
                return Outcome {
                    objective: state.objective(),
                    b: state.b,
                    kkt,
                    iterations,
                    converged: kkt <= target,
                    trace,
                };
            }
            inner_tol = (inner_tol * 0.1).max(0.1 * target);
        }
    }
}

struct CdState<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    penalty: f64,
    pert: Option<&'a Perturbation<'a>>,
    b: DVector<f64>,
    /// `y − Xb`
    resid: DVector<f64>,
    /// `Σ(b − b_ref)`, only with a perturbation
    shift: DVector<f64>,
    curvature: Vec<f64>,
}

impl<'a> CdState<'a> {
    fn new(
        x: &'a DMatrix<f64>,
        y: &'a DVector<f64>,
        penalty: f64,
        pert: Option<&'a Perturbation<'a>>,
        init: Option<&DVector<f64>>,
    ) -> Self {
        let p = x.ncols();
        let b = init.cloned().unwrap_or_else(|| DVector::zeros(p));
        let resid = y - x * &b;
        let shift = match pert {
            Some(pt) => sigma_apply(pt.sigma, &(&b - pt.b_ref)),
            None => DVector::zeros(0),
        };
        let curvature = (0..p)
            .map(|j| {
                let col = x.column(j).norm_squared();
                match pert {
                    Some(pt) => col + pt.weight * sigma_entry(pt.sigma, j, j),
                    None => col,
                }
            })
            .collect();
        CdState {
            x,
            y,
            penalty,
            pert,
            b,
            resid,
            shift,
            curvature,
        }
    }

    fn correlation(&self, j: usize) -> f64 {
        let c = self.x.column(j).dot(&self.resid);
        match self.pert {
            Some(pt) => c - pt.weight * self.shift[j],
            None => c,
        }
    }

    fn set(&mut self, j: usize, value: f64) {
        let delta = value - self.b[j];
        if delta == 0.0 {
            return;
        }
        self.b[j] = value;
        self.resid.axpy(-delta, &self.x.column(j), 1.0);
        if let Some(pt) = self.pert {
            match pt.sigma {
                Some(s) => self.shift.axpy(delta, &s.column(j), 1.0),
                None => self.shift[j] += delta,
            }
        }
    }

    /// One cyclic pass; returns the largest change measured as `|Δb_j|·curv_j`.
    fn sweep(&mut self, coords: &[usize]) -> f64 {
        let mut moved = 0.0_f64;
        for &j in coords {
            let curv = self.curvature[j];
            let new = if curv > 0.0 {
                soft_threshold(curv * self.b[j] + self.correlation(j), self.penalty) / curv
            } else {
                0.0
            };
            moved = moved.max((new - self.b[j]).abs() * curv);
            self.set(j, new);
        }
        moved
    }

    fn signed_support(&self) -> Vec<(usize, bool)> {
        (0..self.b.len())
            .filter(|&j| self.b[j] != 0.0)
            .map(|j| (j, self.b[j] > 0.0))
            .collect()
    }

    fn support(&self) -> Vec<usize> {
        (0..self.b.len()).filter(|&j| self.b[j] != 0.0).collect()
    }

    fn objective(&self) -> f64 {
        let mut obj = 0.5 * self.resid.norm_squared() + self.penalty * l1_norm(&self.b);
        if let Some(pt) = self.pert {
            obj += 0.5 * pt.weight * (&self.b - pt.b_ref).dot(&self.shift);
        }
        obj
    }

    fn kkt_residual(&self) -> f64 {
        let corr = correlations(self.x, self.y, &self.b, self.pert);
        kkt_distance(&self.b, &corr, self.penalty)
    }

    /// Solves the smooth problem on the signed support exactly and keeps the
    /// result if the signs survive and the objective does not increase.
    fn polish(&mut self, signed: &[(usize, bool)]) -> bool {
        let m = signed.len();
        if m == 0 || m > self.x.nrows() && self.pert.is_none() {
            return false;
        }
        let cols: Vec<usize> = signed.iter().map(|&(j, _)| j).collect();
        let xa = crate::linalg::select_columns(self.x, &cols);
        let mut gram = xa.tr_mul(&xa);
        let mut rhs = xa.tr_mul(self.y);
        if let Some(pt) = self.pert {
            let sigma_ref = sigma_apply(pt.sigma, pt.b_ref);
            for (a, &ja) in cols.iter().enumerate() {
                rhs[a] += pt.weight * sigma_ref[ja];
                for (c, &jc) in cols.iter().enumerate() {
                    gram[(a, c)] += pt.weight * sigma_entry(pt.sigma, ja, jc);
                }
            }
        }
        for (a, &(_, positive)) in signed.iter().enumerate() {
            rhs[a] -= if positive { self.penalty } else { -self.penalty };
        }
        let Some(chol) = gram.cholesky() else {
            return false;
        };
        let sol = chol.solve(&rhs);
        let consistent = signed
            .iter()
            .zip(sol.iter())
            .all(|(&(_, positive), &v)| if positive { v > 0.0 } else { v < 0.0 });
        if !consistent || sol.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let before = self.objective();
        let saved = self.b.clone();
        let mut candidate = DVector::zeros(self.b.len());
        for (&j, &v) in cols.iter().zip(sol.iter()) {
            candidate[j] = v;
        }
        self.reset(candidate);
        if self.objective() <= before + 1e-13 * before.abs().max(1.0) {
            true
        } else {
            self.reset(saved);
            false
        }
    }

    fn reset(&mut self, b: DVector<f64>) {
        self.resid = self.y - self.x * &b;
        if let Some(pt) = self.pert {
            self.shift = sigma_apply(pt.sigma, &(&b - pt.b_ref));
        }
        self.b = b;
    }
}

fn sigma_apply(sigma: Option<&DMatrix<f64>>, v: &DVector<f64>) -> DVector<f64> {
    match sigma {
        Some(s) => s * v,
        None => v.clone(),
    }
}

fn sigma_entry(sigma: Option<&DMatrix<f64>>, i: usize, j: usize) -> f64 {
    match sigma {
        Some(s) => s[(i, j)],
        None => f64::from(u8::from(i == j)),
    }
}

/// Negative gradient of the smooth part: `Xᵀ(y − Xb) − μnΣ(b − b_ref)`.
fn correlations(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    b: &DVector<f64>,
    pert: Option<&Perturbation<'_>>,
) -> DVector<f64> {
    let mut c = x.tr_mul(&(y - x * b));
    if let Some(pt) = pert {
        c.axpy(-pt.weight, &sigma_apply(pt.sigma, &(b - pt.b_ref)), 1.0);
    }
    c
}

fn kkt_distance(b: &DVector<f64>, corr: &DVector<f64>, penalty: f64) -> f64 {
    b.iter()
        .zip(corr.iter())
        .map(|(&bj, &cj)| {
            if bj > 0.0 {
                (cj - penalty).abs()
            } else if bj < 0.0 {
                (cj + penalty).abs()
            } else {
                (cj.abs() - penalty).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn active_set_of(
    b: &DVector<f64>,
    corr: &DVector<f64>,
    penalty: f64,
    tol: f64,
    eta: f64,
) -> Vec<usize> {
    let scale = eta * crate::linalg::inf_norm(b).max(1.0);
    let floor = (1.0 - 10.0 * tol) * penalty;
    (0..b.len())
        .filter(|&j| b[j].abs() > scale && corr[j].abs() >= floor)
        .collect()
}

/// `max_j dist(x_jᵀ(y − Xb), λ√n ∂|b_j|)` for the plain Lasso.
pub fn kkt_certificate(b: &DVector<f64>, problem: &RegressionProblem) -> f64 {
    let corr = correlations(&problem.x, &problem.y, b, None);
    kkt_distance(b, &corr, problem.penalty())
}

/// `½‖Xb − y‖² + λ√n‖b‖₁`
pub fn lasso_objective(problem: &RegressionProblem, b: &DVector<f64>) -> f64 {
    0.5 * (&problem.x * b - &problem.y).norm_squared() + problem.penalty() * l1_norm(b)
}

/// `L_μ(b)`
pub fn perturbed_objective(
    problem: &RegressionProblem,
    b: &DVector<f64>,
    b_ref: &DVector<f64>,
    mu: f64,
) -> f64 {
    lasso_objective(problem, b) + 0.5 * mu * problem.n() as f64 * problem.sigma_norm_sq(&(b - b_ref))
}

/// Smallest `λ` with `b̂ = 0`: `‖Xᵀy‖_∞ / √n`.
pub fn lambda_max(problem: &RegressionProblem) -> f64 {
    crate::linalg::inf_norm(&problem.x.tr_mul(&problem.y)) / (problem.n() as f64).sqrt()
}

/// Entries with `|b_j| > eta·max(1, ‖b‖_∞)` whose correlation sits at the
/// penalty level `|x_jᵀ(y − Xb)| ≥ (1 − 10·tol)·λ√n`.
pub fn extract_active_set(fit: &LassoFit, problem: &RegressionProblem, eta: f64) -> Vec<usize> {
    let corr = correlations(&problem.x, &problem.y, &fit.coefficients, None);
    active_set_of(&fit.coefficients, &corr, problem.penalty(), fit.tol, eta)
}

pub fn lasso_fit(problem: &RegressionProblem, tol: f64, max_iter: usize) -> Result<LassoFit> {
    LassoSolver::with_tol(tol).max_sweeps(max_iter).fit(problem)
}

pub fn perturbed_fit(
    problem: &RegressionProblem,
    b_star_ref: &DVector<f64>,
    mu: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PerturbedFit> {
    LassoSolver::with_tol(tol)
        .max_sweeps(max_iter)
        .fit_perturbed(problem, b_star_ref, mu, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{
        sample_problem, sample_sign_pattern, Covariance, CovarianceSpec, ProblemConfig,
        SignPattern,
    };
    use proptest::prelude::*;
    use std::sync::Arc;

    fn scalar_problem() -> RegressionProblem {
        // n = 1 so λ√n = λ = 1
        let cfg = ProblemConfig::isotropic(1, 1, 1.0, 1.0, 0);
        let cov = Arc::new(crate::problem::build_covariance(&cfg.covariance).unwrap());
        RegressionProblem::from_parts(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 2.0),
            DVector::zeros(1),
            cfg,
            SignPattern::new(vec![1]).unwrap(),
            cov,
        )
        .unwrap()
    }

    fn random_problem(n: usize, p: usize, k: usize, lambda: f64, seed: u64) -> RegressionProblem {
        let cfg = ProblemConfig {
            lambda,
            ..ProblemConfig::isotropic(n, p, 1.0, lambda, seed)
        };
        let pat = sample_sign_pattern(p, k, seed.wrapping_add(1)).unwrap();
        sample_problem(&cfg, &pat, 1.0).unwrap()
    }

    #[test]
    fn scalar_soft_threshold() {
        let prob = scalar_problem();
        let fit = lasso_fit(&prob, 1e-12, 100).unwrap();
        assert!(fit.converged);
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert_eq!(fit.active_set, vec![0]);
        let corr = (prob.x.tr_mul(&(&prob.y - &prob.x * &fit.coefficients)))[0];
        assert!((corr - 1.0).abs() < 1e-12);
        assert!(kkt_certificate(&fit.coefficients, &prob) < 1e-12);
    }

    #[test]
    fn large_lambda_gives_zero() {
        let prob = random_problem(30, 50, 5, 1.0, 3);
        let big = prob.with_lambda(lambda_max(&prob) * 1.0001);
        let fit = LassoSolver::default().fit(&big).unwrap();
        assert!(fit.coefficients.iter().all(|&b| b == 0.0));
        assert_eq!(fit.df, 0);
        assert!(extract_active_set(&fit, &big, 1e-10).is_empty());
    }

    #[test]
    fn kkt_certificate_detects_perturbation() {
        let prob = random_problem(30, 50, 5, 0.5, 8);
        let fit = LassoSolver::default().fit(&prob).unwrap();
        assert!(fit.converged);
        assert!(kkt_certificate(&fit.coefficients, &prob) <= 1e-9 * prob.penalty());
        let mut off = fit.coefficients.clone();
        off[0] += 5.0;
        assert!(kkt_certificate(&off, &prob) > 1.0);
    }

    #[test]
    fn objective_decreases_across_sweeps() {
        let prob = random_problem(40, 80, 8, 0.3, 21);
        let fit = LassoSolver::default().record_trace(true).fit(&prob).unwrap();
        assert!(fit.converged);
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn vanishing_perturbation_matches_lasso() {
        let prob = random_problem(25, 40, 4, 0.4, 5);
        let fit = LassoSolver::default().fit(&prob).unwrap();
        let pf = LassoSolver::default()
            .fit_perturbed(&prob, &prob.b_star, 1e-10, None)
            .unwrap();
        assert!(pf.converged);
        assert!((&fit.coefficients - &pf.coefficients).amax() < 1e-4);
    }

    #[test]
    fn perturbed_zero_when_penalty_dominates() {
        let prob = random_problem(20, 30, 0, 0.5, 13);
        // b* = 0 so the perturbation pulls toward zero as well
        let bound = crate::linalg::inf_norm(&prob.x.tr_mul(&prob.y)) / (20f64).sqrt();
        let big = prob.with_lambda(bound * 1.01);
        let pf = LassoSolver::default()
            .fit_perturbed(&big, &big.b_star, 0.5, None)
            .unwrap();
        assert!(pf.coefficients.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn perturbed_with_correlated_design() {
        let cfg = ProblemConfig {
            covariance: CovarianceSpec::toeplitz(30, 0.6, 5.0),
            ..ProblemConfig::isotropic(20, 30, 1.0, 0.3, 4)
        };
        let pat = sample_sign_pattern(30, 4, 9).unwrap();
        let prob = sample_problem(&cfg, &pat, 2.0).unwrap();
        let fit = LassoSolver::default().fit(&prob).unwrap();
        let pf = LassoSolver::default()
            .fit_perturbed(&prob, &prob.b_star, 0.3, None)
            .unwrap();
        assert!(fit.converged && pf.converged);
        let risk = |b: &DVector<f64>| prob.sigma_norm_sq(&(b - &prob.b_star));
        assert!(risk(&pf.coefficients) <= risk(&fit.coefficients) + 1e-9);
        let lmu = |b: &DVector<f64>| perturbed_objective(&prob, b, &prob.b_star, 0.3);
        assert!(lmu(&pf.coefficients) <= lmu(&fit.coefficients) + 1e-9);
    }

    #[test]
    fn invalid_inputs() {
        let prob = scalar_problem();
        assert!(lasso_fit(&prob, 0.0, 10).is_err());
        assert!(perturbed_fit(&prob, &prob.b_star, 0.0, 1e-9, 10).is_err());
        assert!(perturbed_fit(&prob, &prob.b_star, 1.5, 1e-9, 10).is_err());
        assert!(LassoSolver::default()
            .fit_from(&prob, Some(&DVector::zeros(3)))
            .is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        let prob = random_problem(40, 80, 10, 0.1, 2);
        let fit = lasso_fit(&prob, 1e-12, 1).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 1);
    }

    #[test]
    fn duplicated_columns_do_not_crash() {
        let cfg = ProblemConfig::isotropic(5, 6, 1.0, 0.05, 0);
        let mut x = crate::rng::gaussian_matrix(&mut crate::rng::stream_rng(1, 0), 5, 6);
        let dup = x.column(0).clone_owned();
        x.set_column(1, &dup);
        let cov: Arc<Covariance> = Arc::new(crate::problem::build_covariance(&cfg.covariance).unwrap());
        let pat = SignPattern::new(vec![1, 0, 0, 0, 0, 0]).unwrap();
        let mut b = DVector::zeros(6);
        b[0] = 3.0;
        let prob = RegressionProblem::from_parts(x, b, DVector::zeros(5), cfg, pat, cov).unwrap();
        let fit = LassoSolver::default().fit(&prob).unwrap();
        assert!(fit.objective.is_finite());
        assert!(fit.df <= 6);
    }

    #[test]
    fn warm_start_reaches_same_solution() {
        let prob = random_problem(30, 60, 6, 0.4, 17);
        let cold = LassoSolver::default().fit(&prob).unwrap();
        let other = prob.with_lambda(0.6);
        let warm_init = LassoSolver::default().fit(&other).unwrap().coefficients;
        let warm = LassoSolver::default().fit_from(&prob, Some(&warm_init)).unwrap();
        assert!((&cold.coefficients - &warm.coefficients).amax() < 1e-8);
    }

    #[test]
    fn record_serializes_without_coefficients() {
        let fit = LassoSolver::default().fit(&scalar_problem()).unwrap();
        let json = serde_json::to_value(fit.record(false)).unwrap();
        assert!(json.get("coefficients").is_none());
        assert_eq!(json["df"], 1);
        let json = serde_json::to_value(fit.record(true)).unwrap();
        assert_eq!(json["coefficients"][0], 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn fits_satisfy_kkt_and_df_matches_l0(seed in any::<u64>(), n in 5usize..30, extra in 0usize..30, lambda in 0.05f64..1.5) {
            let p = n + extra;
            let prob = random_problem(n, p, n / 3, lambda, seed);
            let fit = LassoSolver::default().fit(&prob).unwrap();
            prop_assert!(fit.converged);
            prop_assert!(fit.kkt_residual <= 1e-9 * prob.penalty());
            let l0 = fit.coefficients.iter().filter(|b| **b != 0.0).count();
            prop_assert_eq!(fit.df, l0);
            prop_assert!(fit.df <= n.min(p));
        }
    }
}
