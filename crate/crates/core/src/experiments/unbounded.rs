//! Unbounded-risk construction: above the transition, find a sign pattern
//! on which Basis Pursuit provably fails, then scale the signal
//! `b* = t·b₀` and watch the Lasso risk grow.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{UnboundedConfig, Validate};
use super::{tags, with_pool, RunOptions};
use crate::basis_pursuit::certify_b0_failure;
use crate::cone::{gaussian_width, ConeSpec};
use crate::error::Result;
use crate::lasso::LassoSolver;
use crate::linalg::quantiles;
use crate::problem::{build_covariance, sample_problem_with, sample_sign_pattern};
use crate::rng::derive_seed;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct UnboundedRecord {
    pub seed_index: usize,
    pub seed: u64,
    pub bp_failure_certified: bool,
    pub t: f64,
    pub risk: f64,
    pub support_fraction: f64,
    pub l2_error: f64,
    pub df: usize,
    pub converged: bool,
}

/// Medians over the certified seeds at one `t`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct UnboundedPoint {
    pub t: f64,
    pub seeds: usize,
    pub risk_q25: f64,
    pub risk_median: f64,
    pub risk_q75: f64,
    pub support_median: f64,
    pub l2_median: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct UnboundedRunResult {
    pub config: UnboundedConfig,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub t_grid: Vec<f64>,
    pub width_normalized: f64,
    /// `𝒢/√n ≥ 1` for the cell.
    pub above_transition: bool,
    pub certified_seeds: usize,
    pub uncertified_seeds: usize,
    /// At least one seed with a certified BP failure.
    pub bp_failure_certified: bool,
    /// Errors from seeds that could not be run, with their index.
    pub seed_errors: Vec<(usize, String)>,
    pub points: Vec<UnboundedPoint>,
    pub records: Vec<UnboundedRecord>,
}

impl UnboundedRunResult {
    /// `median risk at the largest t / median risk at the smallest t`
    pub fn risk_ratio(&self) -> Option<f64> {
        let (first, last) = (self.points.first()?, self.points.last()?);
        Some(last.risk_median / first.risk_median)
    }
}

pub fn run_unbounded_construction(
    config: &UnboundedConfig,
    options: &RunOptions,
) -> Result<UnboundedRunResult> {
    config.validate()?;
    let dims = config.cell()?;
    let covariance = std::sync::Arc::new(build_covariance(&config.covariance.spec(dims.p))?);
    let width_seed = derive_seed(config.seed, tags::WIDTH);
    let width_cone = ConeSpec::new(
        sample_sign_pattern(dims.p, dims.k, width_seed)?,
        covariance.clone(),
    )?;

    let (width, per_seed) = with_pool(options, || {
        let width = gaussian_width(&width_cone, config.width_samples, width_seed);
        let per_seed: Vec<Result<Vec<UnboundedRecord>>> = (0..config.seeds)
            .into_par_iter()
            .map(|i| run_seed(config, &dims, covariance.clone(), i))
            .collect();
        (width, per_seed)
    })?;
    let width_normalized = width?.mean / (dims.n as f64).sqrt();
    let above_transition = width_normalized >= 1.0;
    if !above_transition {
        log::warn!(
            "cell (delta {}, rho {}) has normalized width {width_normalized:.3} < 1: \
             below the transition, BP failures will be rare",
            dims.delta,
            dims.rho
        );
    }

    let mut records = Vec::new();
    let mut seed_errors = Vec::new();
    for (i, outcome) in per_seed.into_iter().enumerate() {
        match outcome {
            Ok(rows) => records.extend(rows),
            Err(e) => seed_errors.push((i, e.to_string())),
        }
    }
    let certified_seeds = records
        .iter()
        .filter(|r| r.bp_failure_certified && r.t == config.t_grid[0])
        .count();
    let uncertified_seeds = config.seeds - seed_errors.len() - certified_seeds;
    let points = config
        .t_grid
        .iter()
        .filter_map(|&t| {
            let at: Vec<&UnboundedRecord> = records
                .iter()
                .filter(|r| r.bp_failure_certified && r.t == t)
                .collect();
            if at.is_empty() {
                return None;
            }
            let risk: Vec<f64> = at.iter().map(|r| r.risk).collect();
            let support: Vec<f64> = at.iter().map(|r| r.support_fraction).collect();
            let l2: Vec<f64> = at.iter().map(|r| r.l2_error).collect();
            let rq = quantiles(&risk, &[0.25, 0.5, 0.75]);
            Some(UnboundedPoint {
                t,
                seeds: at.len(),
                risk_q25: rq[0],
                risk_median: rq[1],
                risk_q75: rq[2],
                support_median: quantiles(&support, &[0.5])[0],
                l2_median: quantiles(&l2, &[0.5])[0],
            })
        })
        .collect();
    if certified_seeds == 0 {
        log::warn!("no seed produced a certified BP failure; no curves reported");
    }
    Ok(UnboundedRunResult {
        config: config.clone(),
        n: dims.n,
        p: dims.p,
        k: dims.k,
        t_grid: config.t_grid.clone(),
        width_normalized,
        above_transition,
        certified_seeds,
        uncertified_seeds,
        bp_failure_certified: certified_seeds > 0,
        seed_errors,
        points,
        records,
    })
}

fn run_seed(
    config: &UnboundedConfig,
    dims: &super::config::CellDims,
    covariance: std::sync::Arc<crate::problem::Covariance>,
    index: usize,
) -> Result<Vec<UnboundedRecord>> {
    let seed = derive_seed(config.seed, index as u64);
    let pattern = sample_sign_pattern(dims.p, dims.k, derive_seed(seed, tags::PATTERN))?;
    let problem_config = dims.problem_config(config.lambda, config.sigma, &config.covariance, seed);
    let mut problem = sample_problem_with(&problem_config, covariance, &pattern, config.amplitude)?;
    if config.noiseless {
        problem = problem.noiseless();
    }
    let certificate = certify_b0_failure(&problem.x, &pattern, config.amplitude, 1e-9)?;
    let b0 = problem.b_star.clone();
    let solver = LassoSolver::default();
    let n = dims.n as f64;
    let mut warm: Option<(f64, DVector<f64>)> = None;
    let mut rows = Vec::with_capacity(config.t_grid.len());
    for &t in &config.t_grid {
        let scaled = problem.with_signal(&b0 * t)?;
        let init = warm.as_ref().map(|(t0, b)| b * (t / t0));
        let fit = solver.fit_from(&scaled, init.as_ref())?;
        let h = &fit.coefficients - &scaled.b_star;
        rows.push(UnboundedRecord {
            seed_index: index,
            seed,
            bp_failure_certified: certificate.failed,
            t,
            risk: scaled.sigma_norm_sq(&h),
            support_fraction: fit.df as f64 / n,
            l2_error: h.norm(),
            df: fit.df,
            converged: fit.converged,
        });
        warm = Some((t, fit.coefficients));
    }
    Ok(rows)
}
