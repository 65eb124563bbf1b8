//! Empirical restricted-eigenvalue constants over `K` and the deterministic
//! risk bounds they imply for the Lasso.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::cone::{
    cone_membership, gaussian_width, gordon_deviation, gordon_from_width,
    project_transformed_cone, ConeSpec, GordonPrediction, DEFAULT_DELTA_FAIL,
};
use crate::error::{Error, Result};
use crate::lasso::LassoFit;
use crate::linalg::op_norm;
use crate::problem::RegressionProblem;
use crate::rng::{derive_seed, gaussian_vector, stream_rng};

/// Settings of the multi-start projected-gradient search.
#[derive(Clone, Debug)]
pub struct ReOptions {
    pub iterations: usize,
    /// Monte-Carlo samples for the width behind the Gordon prediction.
    pub width_samples: usize,
    /// Use this width instead of estimating one.
    pub width: Option<f64>,
    /// Deviation term of the Gordon bound.
    pub t: f64,
}

impl Default for ReOptions {
    fn default() -> Self {
        ReOptions {
            iterations: 500,
            width_samples: 1000,
            width: None,
            t: gordon_deviation(DEFAULT_DELTA_FAIL),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct REEstimate {
    /// Smallest `‖Xv‖₂/(√n‖v‖₂)` found over `v ∈ K`. The search can only
    /// find feasible points, so this is an upper bound on the true infimum.
    pub delta_star_heuristic: f64,
    pub restarts: usize,
    /// Gordon lower bound on the RE constant (`/√κ` form).
    pub gordon_prediction: f64,
    pub gordon: GordonPrediction,
    pub width: f64,
    /// `heuristic ≥ prediction > 0`
    pub certified: bool,
    #[serde(skip)]
    pub minimizer: DVector<f64>,
}

/// Multi-start projected gradient on `v ↦ ½‖Xv‖²/n` over `K ∩ {‖v‖₂ = 1}`.
pub fn re_heuristic(
    cone: &ConeSpec,
    x: &DMatrix<f64>,
    restarts: usize,
    seed: u64,
) -> Result<REEstimate> {
    re_heuristic_with(cone, x, restarts, seed, &ReOptions::default())
}

pub fn re_heuristic_with(
    cone: &ConeSpec,
    x: &DMatrix<f64>,
    restarts: usize,
    seed: u64,
    options: &ReOptions,
) -> Result<REEstimate> {
    if restarts == 0 {
        return Err(Error::InvalidConfig("re_heuristic needs at least one restart".into()));
    }
    if cone.is_trivial() {
        return Err(Error::TrivialCone("K = {0} has no unit-norm members"));
    }
    if x.ncols() != cone.p() {
        return Err(Error::DimensionMismatch {
            what: "design columns",
            expected: cone.p(),
            got: x.ncols(),
        });
    }
    let n = x.nrows();
    let lipschitz = op_norm(x, 200, 1e-8).powi(2) / n as f64;
    let step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 0.0 };
    let start_seed = derive_seed(seed, 0x5245_5354);

    let runs: Vec<(f64, DVector<f64>)> = (0..restarts)
        .into_par_iter()
        .map(|r| descend(cone, x, step, options.iterations, start_seed, r))
        .collect::<Result<_>>()?;
    // first minimum in restart order, so extra restarts can only lower it
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.0 < runs[best].0 {
            best = i;
        }
    }
    let width = match options.width {
        Some(w) => w,
        None => gaussian_width(cone, options.width_samples, derive_seed(seed, 0x5749_4454))?.mean,
    };
    let gordon = gordon_from_width(width, n, options.t, cone.covariance().kappa());
    let heuristic = runs[best].0;
    Ok(REEstimate {
        delta_star_heuristic: heuristic,
        restarts,
        gordon_prediction: gordon.re_constant,
        gordon,
        width,
        certified: gordon.re_constant > 0.0 && heuristic >= gordon.re_constant,
        minimizer: runs[best].1.clone(),
    })
}

fn ratio(x: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (x * v).norm() / ((x.nrows() as f64).sqrt() * v.norm())
}

fn into_cone(cone: &ConeSpec, w: &DVector<f64>) -> Result<Option<DVector<f64>>> {
    let cov = cone.covariance();
    let proj = project_transformed_cone(cone, &cov.apply_sqrt(w), 1e-12)?;
    let v = proj.preimage;
    let norm = v.norm();
    Ok((norm > 1e-12 * w.norm().max(1.0)).then(|| v / norm))
}

fn descend(
    cone: &ConeSpec,
    x: &DMatrix<f64>,
    step: f64,
    iterations: usize,
    seed: u64,
    restart: usize,
) -> Result<(f64, DVector<f64>)> {
    let s = cone.pattern().to_vector();
    let mut v = -&s / s.norm();
    if restart > 0 {
        let g = gaussian_vector(&mut stream_rng(seed, restart as u64), cone.p());
        let w = &v + g / (cone.p() as f64).sqrt();
        if let Some(start) = into_cone(cone, &w)? {
            v = start;
        }
    }
    let n = x.nrows() as f64;
    let mut best = (ratio(x, &v), v.clone());
    for _ in 0..iterations {
        let grad = x.tr_mul(&(x * &v)) / n;
        let Some(next) = into_cone(cone, &(&v - grad * step))? else {
            break;
        };
        v = next;
        let value = ratio(x, &v);
        if value < best.0 {
            best = (value, v.clone());
        }
    }
    Ok(best)
}

/// Instance constants feeding the risk bounds.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct REBoundInputs {
    /// `‖Xs‖₂/√(nk)`
    pub c1: f64,
    /// `√n/√k`
    pub c2: f64,
    /// `‖ε‖₂/√n`
    pub c3: f64,
    pub lambda: f64,
    pub delta_star: f64,
    pub k: usize,
    pub n: usize,
}

impl REBoundInputs {
    /// Measures `c₁, c₂, c₃` on the realized instance for the pattern of `cone`.
    pub fn from_instance(
        problem: &RegressionProblem,
        cone: &ConeSpec,
        delta_star: f64,
    ) -> Result<Self> {
        let k = cone.k();
        if k == 0 {
            return Err(Error::TrivialCone("risk bounds need k ≥ 1"));
        }
        let n = problem.n();
        let (nf, kf) = (n as f64, k as f64);
        Ok(REBoundInputs {
            c1: (&problem.x * cone.pattern().to_vector()).norm() / (nf * kf).sqrt(),
            c2: nf.sqrt() / kf.sqrt(),
            c3: problem.noise.norm() / nf.sqrt(),
            lambda: problem.config.lambda,
            delta_star,
            k,
            n,
        })
    }
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Prop31Bounds {
    /// Bound on `‖X(b̂ − b*)‖₂/√n`
    pub prerisk: f64,
    /// Bound on `‖b̂ − b*‖₂`
    pub l2: f64,
}

pub fn prop31_bounds(inputs: &REBoundInputs) -> Result<Prop31Bounds> {
    let d = inputs.delta_star;
    if !(d > 0.0) {
        return Err(Error::NonPositiveRe(d));
    }
    let lam = inputs.lambda;
    let c123 = inputs.c1 * inputs.c2 * inputs.c3;
    let prerisk = (lam * (inputs.k as f64 / inputs.n as f64).sqrt() + c123) / d;
    let l2 = prerisk * (inputs.c2 * inputs.c3 / lam + (1.0 + c123 / lam) / d);
    Ok(Prop31Bounds { prerisk, l2 })
}

/// Everything the bound chain computes on one instance.
#[derive(Clone, Debug, Serialize)]
pub struct Prop31Report {
    pub inputs: REBoundInputs,
    /// `s·‖Xh‖‖ε‖/(kλ√n) − h` with `h = b̂ − b*`
    #[serde(skip)]
    pub pivot: DVector<f64>,
    pub pivot_norm: f64,
    /// `sᵀv − Σ_{S^c}|v_j|`, nonnegative when the chain holds
    pub pivot_margin: f64,
    /// `−v ∈ K` within `1e-7·‖v‖₂`. The inequality the optimality conditions
    /// give is `Σ_{S^c}|v_j| ≤ sᵀv`, i.e. membership of `−v`; the RE
    /// condition is symmetric in `v` so the argument is unaffected.
    pub pivot_in_cone: bool,
    pub prerisk_measured: f64,
    pub l2_measured: f64,
    pub bounds: Option<Prop31Bounds>,
    pub certified: bool,
    pub prerisk_holds: Option<bool>,
    pub l2_holds: Option<bool>,
}

pub fn check_prop31_chain(
    problem: &RegressionProblem,
    cone: &ConeSpec,
    fit: &LassoFit,
    re: &REEstimate,
) -> Result<Prop31Report> {
    if !fit.converged {
        return Err(Error::InvalidConfig("bound chain needs a converged fit".into()));
    }
    let inputs = REBoundInputs::from_instance(problem, cone, re.delta_star_heuristic)?;
    let n = problem.n() as f64;
    let h = &fit.coefficients - &problem.b_star;
    let xh = (&problem.x * &h).norm();
    let scale = xh * problem.noise.norm() / (inputs.k as f64 * inputs.lambda * n.sqrt());
    let pivot = cone.pattern().to_vector() * scale - &h;
    let neg = -&pivot;
    let pivot_in_cone = cone_membership(cone, &neg, 1e-7);
    let bounds = prop31_bounds(&inputs).ok();
    let prerisk_measured = xh / n.sqrt();
    let l2_measured = h.norm();
    let (prerisk_holds, l2_holds) = match (&bounds, re.certified) {
        (Some(b), true) => (Some(prerisk_measured <= b.prerisk), Some(l2_measured <= b.l2)),
        _ => (None, None),
    };
    Ok(Prop31Report {
        inputs,
        pivot_norm: pivot.norm(),
        pivot_margin: -cone.excess(&neg),
        pivot,
        pivot_in_cone,
        prerisk_measured,
        l2_measured,
        bounds,
        certified: re.certified,
        prerisk_holds,
        l2_holds,
    })
}

/// One per-seed CSV row.
#[derive(Clone, Debug, Serialize)]
pub struct Prop31Row {
    pub seed: u64,
    pub k: usize,
    pub n: usize,
    pub p: usize,
    pub lambda: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub delta_heur: f64,
    pub gordon_pred: f64,
    pub prerisk_bound: f64,
    pub prerisk_measured: f64,
    pub l2_bound: f64,
    pub l2_measured: f64,
    #[serde(rename = "v_in_K")]
    pub v_in_k: bool,
}

impl Prop31Row {
    pub fn new(seed: u64, p: usize, re: &REEstimate, report: &Prop31Report) -> Self {
        let i = &report.inputs;
        Prop31Row {
            seed,
            k: i.k,
            n: i.n,
            p,
            lambda: i.lambda,
            c1: i.c1,
            c2: i.c2,
            c3: i.c3,
            delta_heur: re.delta_star_heuristic,
            gordon_pred: re.gordon_prediction,
            prerisk_bound: report.bounds.map_or(f64::NAN, |b| b.prerisk),
            prerisk_measured: report.prerisk_measured,
            l2_bound: report.bounds.map_or(f64::NAN, |b| b.l2),
            l2_measured: report.l2_measured,
            v_in_k: report.pivot_in_cone,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lasso::LassoSolver;
    use crate::problem::{
        build_covariance, sample_problem, sample_sign_pattern, CovarianceSpec, ProblemConfig,
        SignPattern,
    };
    use std::sync::Arc;

    fn iso(pattern: SignPattern) -> ConeSpec {
        let p = pattern.len();
        ConeSpec::new(pattern, Arc::new(build_covariance(&CovarianceSpec::identity(p)).unwrap()))
            .unwrap()
    }

    #[test]
    fn plug_in_bounds() {
        let inputs = REBoundInputs {
            c1: 1.3,
            c2: 2.0,
            c3: 0.0,
            lambda: 2.0,
            delta_star: 1.0,
            k: 1,
            n: 4,
        };
        let b = prop31_bounds(&inputs).unwrap();
        assert_eq!(b, Prop31Bounds { prerisk: 1.0, l2: 1.0 });
        let half = prop31_bounds(&REBoundInputs { delta_star: 2.0, ..inputs }).unwrap();
        assert_eq!(half.prerisk, 0.5);
        assert!(prop31_bounds(&REBoundInputs { delta_star: 0.0, ..inputs }).is_err());
    }

    #[test]
    fn trivial_cone_is_rejected() {
        let cone = iso(SignPattern::zeros(4));
        assert!(matches!(
            re_heuristic(&cone, &DMatrix::identity(4, 4), 1, 0),
            Err(Error::TrivialCone(_))
        ));
        assert!(re_heuristic(&iso(SignPattern::new(vec![1, 0]).unwrap()), &DMatrix::identity(2, 2), 0, 0).is_err());
    }

    #[test]
    fn isometric_design_gives_one() {
        let cone = iso(SignPattern::new(vec![1; 6]).unwrap());
        let x = DMatrix::identity(6, 6) * 6f64.sqrt();
        let est = re_heuristic(&cone, &x, 3, 1).unwrap();
        assert!((est.delta_star_heuristic - 1.0).abs() < 1e-12);
    }

    #[test]
    fn more_restarts_never_increase() {
        let pattern = sample_sign_pattern(60, 6, 2).unwrap();
        let cone = iso(pattern);
        let x = crate::rng::gaussian_matrix(&mut stream_rng(9, 0), 30, 60);
        let opts = ReOptions { iterations: 100, width: Some(0.0), ..Default::default() };
        let mut last = f64::INFINITY;
        for r in [1, 2, 4, 8] {
            let est = re_heuristic_with(&cone, &x, r, 3, &opts).unwrap();
            assert!(est.delta_star_heuristic <= last);
            last = est.delta_star_heuristic;
        }
    }

    #[test]
    fn noiseless_exact_fit_gives_zero_pivot() {
        let cfg = ProblemConfig::isotropic(20, 30, 1.0, 0.5, 4);
        let pattern = sample_sign_pattern(30, 3, 4).unwrap();
        let problem = sample_problem(&cfg, &pattern, 1.0).unwrap().noiseless();
        let cone = iso(pattern);
        let mut fit = LassoSolver::default().fit(&problem).unwrap();
        fit.coefficients = problem.b_star.clone();
        let re = re_heuristic_with(&cone, &problem.x, 1, 0, &ReOptions { iterations: 10, width: Some(0.0), ..Default::default() }).unwrap();
        let report = check_prop31_chain(&problem, &cone, &fit, &re).unwrap();
        assert_eq!(report.pivot_norm, 0.0);
        assert!(report.pivot_in_cone);
    }

    #[test]
    fn pivot_lies_in_cone_on_converged_fits() {
        for seed in 0..20 {
            let cfg = ProblemConfig::isotropic(40, 80, 1.0, 0.5, seed);
            let pattern = sample_sign_pattern(80, 5 + (seed as usize % 10), seed).unwrap();
            let problem = sample_problem(&cfg, &pattern, 1.0).unwrap();
            let cone = iso(pattern);
            let fit = LassoSolver::default().fit(&problem).unwrap();
            let re = re_heuristic_with(&cone, &problem.x, 1, seed, &ReOptions { iterations: 20, width: Some(0.0), ..Default::default() }).unwrap();
            let report = check_prop31_chain(&problem, &cone, &fit, &re).unwrap();
            assert!(report.pivot_in_cone, "seed {seed}: margin {}", report.pivot_margin);
        }
    }
}
