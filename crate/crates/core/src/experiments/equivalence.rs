//! Joint behaviour of sparsity and risk on both sides of the transition:
//! fits that keep the support fraction away from 1 should have bounded
//! risk, and fits with unbounded risk should be nearly dense.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{CellDims, EquivalenceConfig, UnboundedConfig, Validate};
use super::unbounded::{run_unbounded_construction, UnboundedRunResult};
use super::{tags, with_pool, RunOptions};
use crate::cone::{gaussian_width, ConeSpec};
use crate::diagnostics::diagnose;
use crate::error::Result;
use crate::lasso::LassoSolver;
use crate::linalg::quantiles;
use crate::problem::{build_covariance, sample_problem_with, sample_sign_pattern};
use crate::re::{check_prop31_chain, re_heuristic_with, Prop31Row, ReOptions};
use crate::rng::derive_seed;

/// Counts of the four `(dense?, risk large?)` combinations.
#[derive(Clone, Copy, Debug, Default, Serialize, PartialEq, Eq)]
pub struct Contingency {
    pub sparse_bounded: usize,
    pub sparse_large: usize,
    pub dense_bounded: usize,
    pub dense_large: usize,
}

impl Contingency {
    fn add(&mut self, dense: bool, large: bool) {
        match (dense, large) {
            (false, false) => self.sparse_bounded += 1,
            (false, true) => self.sparse_large += 1,
            (true, false) => self.dense_bounded += 1,
            (true, true) => self.dense_large += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.sparse_bounded + self.sparse_large + self.dense_bounded + self.dense_large
    }

    /// Share of outcomes on the diagonal {sparse & bounded, dense & large}.
    pub fn diagonal_fraction(&self) -> f64 {
        (self.sparse_bounded + self.dense_large) as f64 / self.total().max(1) as f64
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BelowRecord {
    pub seed: u64,
    pub support_fraction: f64,
    pub risk: f64,
    pub converged: bool,
    pub delta_heuristic: f64,
    pub gordon_prediction: f64,
    pub certified: bool,
    /// `κ·l2_bound²` when certified
    pub risk_bound: Option<f64>,
    /// `risk_bound` if certified, else the median-multiple fallback
    pub yardstick: f64,
    pub bounded: bool,
    pub dense: bool,
    pub pivot_in_cone: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub config: EquivalenceConfig,
    pub below_dims: CellDims,
    pub below_width_normalized: f64,
    pub below: Vec<BelowRecord>,
    pub below_median_risk: f64,
    pub below_table: Contingency,
    /// Share of seeds with support fraction ≤ threshold and risk within the
    /// yardstick.
    pub below_good_frequency: f64,
    pub certified_fraction: f64,
    /// Risk-bound chain per converged below-transition seed.
    pub bound_rows: Vec<Prop31Row>,
    pub above: Option<UnboundedRunResult>,
    /// Table at the largest `t`, with "large" meaning beyond the fallback
    /// yardstick.
    pub above_table: Option<Contingency>,
    pub above_risk_ratio: Option<f64>,
    pub above_support_median: Option<f64>,
}

pub fn run_equivalence_experiment(
    config: &EquivalenceConfig,
    options: &RunOptions,
) -> Result<EquivalenceReport> {
    config.validate()?;
    let dims = CellDims::new(config.n, config.delta, config.below.rho)?;
    let covariance = Arc::new(build_covariance(&config.covariance.spec(dims.p))?);
    let below_seed = derive_seed(config.seed, tags::BELOW);
    let width_seed = derive_seed(below_seed, tags::WIDTH);
    let width_cone = ConeSpec::new(sample_sign_pattern(dims.p, dims.k, width_seed)?, covariance.clone())?;

    let (width, below) = with_pool(options, || -> Result<_> {
        let width = gaussian_width(&width_cone, config.width_samples, width_seed)?;
        let re_options = ReOptions {
            iterations: config.re_iterations,
            width: Some(width.mean),
            ..ReOptions::default()
        };
        let below: Vec<Result<(BelowRecord, Option<Prop31Row>)>> = (0..config.below.seeds)
            .into_par_iter()
            .map(|i| below_seed_run(config, &dims, covariance.clone(), &re_options, derive_seed(below_seed, i as u64)))
            .collect();
        Ok((width, below))
    })??;
    let (mut below, bound_rows): (Vec<BelowRecord>, Vec<Option<Prop31Row>>) =
        below.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    let bound_rows: Vec<Prop31Row> = bound_rows.into_iter().flatten().collect();

    let risks: Vec<f64> = below.iter().map(|r| r.risk).collect();
    let below_median_risk = quantiles(&risks, &[0.5])[0];
    let fallback = config.risk_multiple * below_median_risk;
    let mut below_table = Contingency::default();
    for r in &mut below {
        r.yardstick = r.risk_bound.unwrap_or(fallback);
        r.bounded = r.risk <= r.yardstick;
        below_table.add(r.dense, !r.bounded);
    }
    let seeds = below.len() as f64;
    let below_good_frequency = below.iter().filter(|r| !r.dense && r.bounded).count() as f64 / seeds;
    let certified_fraction = below.iter().filter(|r| r.certified).count() as f64 / seeds;

    let (above, above_table, above_risk_ratio, above_support_median) = match &config.above {
        None => (None, None, None, None),
        Some(regime) => {
            let unbounded = UnboundedConfig {
                schema_version: config.schema_version,
                n: config.n,
                delta: config.delta,
                rho: regime.rho,
                lambda: config.lambda,
                sigma: config.sigma,
                amplitude: config.amplitude,
                covariance: config.covariance.clone(),
                t_grid: regime.t_grid.clone(),
                seeds: regime.seeds,
                seed: derive_seed(config.seed, tags::ABOVE),
                width_samples: config.width_samples,
                noiseless: false,
                output_dir: None,
            };
            let result = run_unbounded_construction(&unbounded, options)?;
            let t_max = *regime.t_grid.last().expect("validated non-empty");
            let mut table = Contingency::default();
            for r in result.records.iter().filter(|r| r.t == t_max && r.bp_failure_certified) {
                table.add(r.support_fraction > config.support_threshold, r.risk > fallback);
            }
            let ratio = result.risk_ratio();
            let support = result.points.last().map(|p| p.support_median);
            (Some(result), Some(table), ratio, support)
        }
    };

    Ok(EquivalenceReport {
        config: config.clone(),
        below_dims: dims,
        below_width_normalized: width.normalized(dims.n),
        below,
        below_median_risk,
        below_table,
        below_good_frequency,
        certified_fraction,
        bound_rows,
        above,
        above_table,
        above_risk_ratio,
        above_support_median,
    })
}

fn below_seed_run(
    config: &EquivalenceConfig,
    dims: &CellDims,
    covariance: Arc<crate::problem::Covariance>,
    re_options: &ReOptions,
    seed: u64,
) -> Result<(BelowRecord, Option<Prop31Row>)> {
    let pattern = sample_sign_pattern(dims.p, dims.k, derive_seed(seed, tags::PATTERN))?;
    let problem_config = dims.problem_config(config.lambda, config.sigma, &config.covariance, seed);
    let problem = sample_problem_with(&problem_config, covariance.clone(), &pattern, config.amplitude)?;
    let fit = LassoSolver::default().fit(&problem)?;
    let report = diagnose(&problem, &fit);
    let cone = ConeSpec::new(pattern, covariance.clone())?;
    let re = re_heuristic_with(&cone, &problem.x, config.restarts, derive_seed(seed, tags::RE), re_options)?;
    let (risk_bound, pivot_in_cone, row) = if fit.converged {
        let chain = check_prop31_chain(&problem, &cone, &fit, &re)?;
        let bound = chain
            .bounds
            .filter(|_| re.certified)
            .map(|b| covariance.kappa() * b.l2 * b.l2);
        (bound, chain.pivot_in_cone, Some(Prop31Row::new(seed, dims.p, &re, &chain)))
    } else {
        (None, false, None)
    };
    let record = BelowRecord {
        seed,
        support_fraction: report.support_fraction,
        risk: report.risk,
        converged: fit.converged,
        delta_heuristic: re.delta_star_heuristic,
        gordon_prediction: re.gordon_prediction,
        certified: re.certified,
        risk_bound,
        yardstick: f64::NAN,
        bounded: false,
        dense: report.support_fraction > config.support_threshold,
        pivot_in_cone,
    };
    Ok((record, row))
}
