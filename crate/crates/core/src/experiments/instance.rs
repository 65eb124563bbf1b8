//! Single-instance runs: fit one problem and report its diagnostics.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use super::config::{FitConfig, ProblemSource, Validate};
use super::output::{write_csv_rows, Columns, Emit};
use super::tags;
use crate::diagnostics::{
    diagnose_with, kkt_sparsity_check, sparsity_floor_check, DiagnosticsReport, KktSparsity,
    SparsityFloor,
};
use crate::error::{Error, Result};
use crate::lasso::{FitRecord, LassoSolver};
use crate::problem::{build_covariance, sample_problem_with, sample_sign_pattern, ProblemConfig, RegressionProblem};
use crate::problem_io::load_problem;
use crate::rng::derive_seed;

/// Loads or generates the problem a fit config points at. Relative file
/// paths are resolved against `base` when given.
pub fn build_instance(source: &ProblemSource, base: Option<&Path>) -> Result<RegressionProblem> {
    match source {
        ProblemSource::File(path) => {
            let path = PathBuf::from(path);
            let path = match base {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path,
            };
            load_problem(&path)
        }
        ProblemSource::Generate(g) => {
            let config = ProblemConfig {
                n: g.n,
                p: g.p,
                gamma: (g.p as f64 / g.n as f64).max(1.0),
                sigma: g.sigma,
                lambda: g.lambda,
                covariance: g.covariance.spec(g.p),
                seed: g.seed,
            };
            let covariance = Arc::new(build_covariance(&config.covariance)?);
            let pattern = sample_sign_pattern(g.p, g.k, derive_seed(g.seed, tags::PATTERN))?;
            sample_problem_with(&config, covariance, &pattern, g.amplitude)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FitOutput {
    pub n: usize,
    pub p: usize,
    pub lambda: f64,
    pub fit: FitRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparsity_floor: Option<SparsityFloor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kkt_sparsity: Option<KktSparsity>,
}

/// Fits the configured instance; with `with_diagnostics` also computes the
/// diagnostics report, sparsity floor and KKT sparsity bound.
pub fn run_fit(config: &FitConfig, base: Option<&Path>, with_diagnostics: bool) -> Result<FitOutput> {
    config.validate()?;
    let mut problem = build_instance(&config.problem, base)?;
    if let Some(lambda) = config.lambda {
        problem = problem.with_lambda(lambda);
    }
    let solver = match config.tol {
        Some(tol) => LassoSolver::with_tol(tol),
        None => LassoSolver::default(),
    };
    let fit = solver.fit(&problem)?;
    if !fit.converged {
        log::warn!("Lasso did not converge (KKT residual {:.3e})", fit.kkt_residual);
    }
    let (diagnostics, sparsity_floor, kkt_sparsity) = if with_diagnostics {
        if !fit.converged {
            return Err(Error::InvalidConfig(
                "diagnostics need a converged fit; loosen tol or check the instance".into(),
            ));
        }
        let report = diagnose_with(&problem, &fit, config.mu);
        let floor = sparsity_floor_check(&problem, &report);
        (Some(report), Some(floor), Some(kkt_sparsity_check(&problem, &fit)))
    } else {
        (None, None, None)
    };
    Ok(FitOutput {
        n: problem.n(),
        p: problem.p(),
        lambda: problem.config.lambda,
        fit: fit.record(config.include_coefficients),
        diagnostics,
        sparsity_floor,
        kkt_sparsity,
    })
}

/// Flat one-line summary for CSV.
#[derive(Serialize)]
struct FitRow {
    n: usize,
    p: usize,
    lambda: f64,
    df: usize,
    converged: bool,
    kkt_residual: f64,
    objective: f64,
    risk: Option<f64>,
    l2_error: Option<f64>,
    support_fraction: Option<f64>,
    residual_norm: Option<f64>,
    gcv: Option<f64>,
    lemma1_gap: Option<f64>,
    mu_used: Option<f64>,
    event_chi2: Option<bool>,
    event_opnorm: Option<bool>,
    sparsity_floor_holds: Option<bool>,
    kkt_sparsity_holds: Option<bool>,
}

impl Columns for FitRow {
    const COLUMNS: &'static [&'static str] = &[
        "n", "p", "lambda", "df", "converged", "kkt_residual", "objective", "risk", "l2_error",
        "support_fraction", "residual_norm", "gcv", "lemma1_gap", "mu_used", "event_chi2",
        "event_opnorm", "sparsity_floor_holds", "kkt_sparsity_holds",
    ];
}

impl Emit for FitOutput {
    fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let d = self.diagnostics.as_ref();
        let row = FitRow {
            n: self.n,
            p: self.p,
            lambda: self.lambda,
            df: self.fit.df,
            converged: self.fit.converged,
            kkt_residual: self.fit.kkt_residual,
            objective: self.fit.objective,
            risk: d.map(|r| r.risk),
            l2_error: d.map(|r| r.l2_error),
            support_fraction: d.map(|r| r.support_fraction),
            residual_norm: d.map(|r| r.residual_norm),
            gcv: d.map(|r| r.gcv),
            lemma1_gap: d.map(|r| r.lemma1_gap),
            mu_used: d.map(|r| r.mu_used),
            event_chi2: d.map(|r| r.event_chi2),
            event_opnorm: d.map(|r| r.event_opnorm),
            sparsity_floor_holds: self.sparsity_floor.map(|f| f.holds),
            kkt_sparsity_holds: self.kkt_sparsity.map(|k| k.holds),
        };
        Ok(vec![write_csv_rows(dir.join("fit.csv"), &[row])?])
    }

    fn write_json(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let path = dir.join("fit.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(vec![path])
    }

    fn write_svg(&self, _dir: &Path) -> Result<Vec<PathBuf>> {
        Ok(Vec::new())
    }
}
