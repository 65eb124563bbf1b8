//! Phase-transition sweeps over a `(δ, ρ)` grid.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{CellDims, SweepConfig, Validate};
use super::{crossing, tags, with_pool, RunOptions};
use crate::basis_pursuit::{bp_solve_with, BpOptions, BpStatus};
use crate::cone::{gaussian_width, ConeSpec, WidthEstimate};
use crate::diagnostics::{diagnose, sparsity_floor_check};
use crate::error::Result;
use crate::lasso::LassoSolver;
use crate::linalg::{pairwise_mean, quantiles};
use crate::problem::{build_covariance, sample_problem_with, sample_sign_pattern, Covariance};
use crate::rng::derive_seed;

/// One replication as it appears in the raw log.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ReplicationRecord {
    pub cell: usize,
    pub delta: f64,
    pub rho: f64,
    pub replication: usize,
    pub seed: u64,
    /// `ok` or `error`
    pub status: String,
    pub error: String,
    pub df: Option<usize>,
    pub support_fraction: Option<f64>,
    pub risk: Option<f64>,
    pub l2_error: Option<f64>,
    pub residual_norm: Option<f64>,
    pub gcv: Option<f64>,
    pub lemma1_gap: Option<f64>,
    pub lasso_converged: Option<bool>,
    pub event_chi2: Option<bool>,
    pub event_opnorm: Option<bool>,
    pub sparsity_floor: Option<bool>,
    /// `recovered`, `failed_strictly`, `ambiguous` or empty when not run
    pub bp_status: String,
    pub bp_iterations: Option<usize>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CellSummary {
    pub cell: usize,
    pub delta: f64,
    pub rho: f64,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub replications: usize,
    pub successes: usize,
    pub failures: usize,
    pub risk_q25: Option<f64>,
    pub risk_q50: Option<f64>,
    pub risk_q75: Option<f64>,
    pub support_q25: Option<f64>,
    pub support_q50: Option<f64>,
    pub support_q75: Option<f64>,
    pub lemma1_gap_pos_mean: Option<f64>,
    pub lasso_unconverged: usize,
    pub bp_runs: usize,
    pub bp_recovered: usize,
    pub bp_failed: usize,
    pub ambiguous_count: usize,
    pub bp_success_rate: Option<f64>,
    pub width_mean: Option<f64>,
    pub width_se: Option<f64>,
    pub width_normalized: Option<f64>,
    pub event_chi2_rate: Option<f64>,
    pub event_opnorm_rate: Option<f64>,
    pub sparsity_floor_rate: Option<f64>,
    pub cell_error: String,
}

/// Where, for one `δ`, the BP success rate crosses ½ and the normalized
/// width crosses 1 along `ρ`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CrossingSummary {
    pub delta: f64,
    pub bp_rho: Option<f64>,
    pub width_rho: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub cells: Vec<CellSummary>,
    pub records: Vec<ReplicationRecord>,
    pub crossings: Vec<CrossingSummary>,
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    run_sweep_with(config, &RunOptions::default())
}

/// Seed of a cell: a function of the base seed and the cell coordinates
/// only, so a cell's replications do not depend on the rest of the grid.
pub fn cell_seed(seed: u64, delta: f64, rho: f64) -> u64 {
    derive_seed(derive_seed(seed, delta.to_bits()), rho.to_bits())
}

struct CellSetup {
    dims: CellDims,
    seed: u64,
    covariance: std::result::Result<Arc<Covariance>, String>,
}

pub fn run_sweep_with(config: &SweepConfig, options: &RunOptions) -> Result<SweepResult> {
    config.validate()?;
    let setups: Vec<CellSetup> = config
        .cells()?
        .into_iter()
        .map(|dims| CellSetup {
            dims,
            seed: cell_seed(config.seed, dims.delta, dims.rho),
            covariance: build_covariance(&config.covariance.spec(dims.p))
                .map(Arc::new)
                .map_err(|e| e.to_string()),
        })
        .collect();
    let tasks: Vec<(usize, usize)> = (0..setups.len())
        .flat_map(|c| (0..config.replications).map(move |r| (c, r)))
        .collect();

    let (records, widths) = with_pool(options, || {
        let records: Vec<ReplicationRecord> = tasks
            .par_iter()
            .map(|&(c, r)| run_replication(config, c, &setups[c], r))
            .collect();
        let widths: Vec<std::result::Result<WidthEstimate, String>> = setups
            .par_iter()
            .map(|setup| cell_width(config, setup))
            .collect();
        (records, widths)
    })?;

    let cells: Vec<CellSummary> = setups
        .iter()
        .enumerate()
        .map(|(c, setup)| {
            let rows: Vec<&ReplicationRecord> = records.iter().filter(|r| r.cell == c).collect();
            summarize(c, setup, &rows, &widths[c])
        })
        .collect();
    let crossings = crossings_by_delta(&cells);
    log::info!("sweep finished: {} cells, {} replications", cells.len(), records.len());
    Ok(SweepResult {
        config: config.clone(),
        cells,
        records,
        crossings,
    })
}

fn cell_width(config: &SweepConfig, setup: &CellSetup) -> std::result::Result<WidthEstimate, String> {
    let covariance = setup.covariance.clone()?;
    let seed = derive_seed(setup.seed, tags::WIDTH);
    let pattern = sample_sign_pattern(setup.dims.p, setup.dims.k, seed).map_err(|e| e.to_string())?;
    let cone = ConeSpec::new(pattern, covariance).map_err(|e| e.to_string())?;
    gaussian_width(&cone, config.width_samples, seed).map_err(|e| e.to_string())
}

fn empty_record(cell: usize, dims: &CellDims, replication: usize, seed: u64) -> ReplicationRecord {
    ReplicationRecord {
        cell,
        delta: dims.delta,
        rho: dims.rho,
        replication,
        seed,
        status: "ok".into(),
        error: String::new(),
        df: None,
        support_fraction: None,
        risk: None,
        l2_error: None,
        residual_norm: None,
        gcv: None,
        lemma1_gap: None,
        lasso_converged: None,
        event_chi2: None,
        event_opnorm: None,
        sparsity_floor: None,
        bp_status: String::new(),
        bp_iterations: None,
    }
}

fn run_replication(
    config: &SweepConfig,
    cell: usize,
    setup: &CellSetup,
    replication: usize,
) -> ReplicationRecord {
    let seed = derive_seed(setup.seed, replication as u64);
    let mut record = empty_record(cell, &setup.dims, replication, seed);
    if let Err(e) = fill_replication(config, setup, seed, &mut record) {
        log::warn!("cell {cell} replication {replication}: {e}");
        record.status = "error".into();
        record.error = e.to_string();
    }
    record
}

fn fill_replication(
    config: &SweepConfig,
    setup: &CellSetup,
    seed: u64,
    record: &mut ReplicationRecord,
) -> Result<()> {
    let covariance = setup
        .covariance
        .clone()
        .map_err(crate::error::Error::InvalidConfig)?;
    let dims = &setup.dims;
    let pattern = sample_sign_pattern(dims.p, dims.k, derive_seed(seed, tags::PATTERN))?;
    let problem_config = dims.problem_config(config.lambda, config.sigma, &config.covariance, seed);
    let problem = sample_problem_with(&problem_config, covariance, &pattern, config.amplitude)?;
    if config.fit_lasso {
        let fit = LassoSolver::default().fit(&problem)?;
        let report = diagnose(&problem, &fit);
        record.df = Some(fit.df);
        record.support_fraction = Some(report.support_fraction);
        record.risk = Some(report.risk);
        record.l2_error = Some(report.l2_error);
        record.residual_norm = Some(report.residual_norm);
        record.gcv = Some(report.gcv);
        record.lemma1_gap = Some(report.lemma1_gap);
        record.lasso_converged = Some(fit.converged);
        record.event_chi2 = Some(report.event_chi2);
        record.event_opnorm = Some(report.event_opnorm);
        record.sparsity_floor = Some(sparsity_floor_check(&problem, &report).holds);
    }
    if config.basis_pursuit {
        let opts = BpOptions {
            stop_on_failure: true,
            ..BpOptions::default()
        };
        let bp = bp_solve_with(&problem.x, &problem.b_star, &opts)?;
        record.bp_status = bp.status.as_str().into();
        record.bp_iterations = Some(bp.iterations);
    }
    Ok(())
}

fn rate(flags: &[bool]) -> Option<f64> {
    (!flags.is_empty()).then(|| flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64)
}

fn summarize(
    cell: usize,
    setup: &CellSetup,
    rows: &[&ReplicationRecord],
    width: &std::result::Result<WidthEstimate, String>,
) -> CellSummary {
    let ok: Vec<&&ReplicationRecord> = rows.iter().filter(|r| r.status == "ok").collect();
    let risks: Vec<f64> = ok.iter().filter_map(|r| r.risk).collect();
    let support: Vec<f64> = ok.iter().filter_map(|r| r.support_fraction).collect();
    let gaps: Vec<f64> = ok.iter().filter_map(|r| r.lemma1_gap.map(|g| g.max(0.0))).collect();
    let q = |v: &[f64]| -> [Option<f64>; 3] {
        if v.is_empty() {
            [None; 3]
        } else {
            let qs = quantiles(v, &[0.25, 0.5, 0.75]);
            [Some(qs[0]), Some(qs[1]), Some(qs[2])]
        }
    };
    let [risk_q25, risk_q50, risk_q75] = q(&risks);
    let [support_q25, support_q50, support_q75] = q(&support);
    let bp: Vec<&str> = ok.iter().map(|r| r.bp_status.as_str()).filter(|s| !s.is_empty()).collect();
    let count = |name: &str| bp.iter().filter(|&&s| s == name).count();
    let bp_recovered = count(BpStatus::Recovered.as_str());
    let flags = |f: fn(&ReplicationRecord) -> Option<bool>| -> Vec<bool> {
        ok.iter().filter_map(|r| f(r)).collect()
    };
    let dims = &setup.dims;
    let (width_mean, width_se, cell_error) = match width {
        Ok(w) => (Some(w.mean), Some(w.std_error), String::new()),
        Err(e) => (None, None, format!("width: {e}")),
    };
    CellSummary {
        cell,
        delta: dims.delta,
        rho: dims.rho,
        n: dims.n,
        p: dims.p,
        k: dims.k,
        replications: rows.len(),
        successes: ok.len(),
        failures: rows.len() - ok.len(),
        risk_q25,
        risk_q50,
        risk_q75,
        support_q25,
        support_q50,
        support_q75,
        lemma1_gap_pos_mean: (!gaps.is_empty()).then(|| pairwise_mean(&gaps)),
        lasso_unconverged: ok.iter().filter(|r| r.lasso_converged == Some(false)).count(),
        bp_runs: bp.len(),
        bp_recovered,
        bp_failed: count(BpStatus::FailedStrictly.as_str()),
        ambiguous_count: count(BpStatus::Ambiguous.as_str()),
        bp_success_rate: (!bp.is_empty()).then(|| bp_recovered as f64 / bp.len() as f64),
        width_mean,
        width_se,
        width_normalized: width_mean.map(|w| w / (dims.n as f64).sqrt()),
        event_chi2_rate: rate(&flags(|r| r.event_chi2)),
        event_opnorm_rate: rate(&flags(|r| r.event_opnorm)),
        sparsity_floor_rate: rate(&flags(|r| r.sparsity_floor)),
        cell_error,
    }
}

fn crossings_by_delta(cells: &[CellSummary]) -> Vec<CrossingSummary> {
    let mut deltas: Vec<f64> = cells.iter().map(|c| c.delta).collect();
    deltas.sort_by(|a, b| a.total_cmp(b));
    deltas.dedup();
    deltas
        .into_iter()
        .map(|delta| {
            let mut line: Vec<&CellSummary> = cells.iter().filter(|c| c.delta == delta).collect();
            line.sort_by(|a, b| a.rho.total_cmp(&b.rho));
            let rhos: Vec<f64> = line.iter().map(|c| c.rho).collect();
            let bp: Vec<f64> = line.iter().map(|c| c.bp_success_rate.unwrap_or(f64::NAN)).collect();
            let width: Vec<f64> = line.iter().map(|c| c.width_normalized.unwrap_or(f64::NAN)).collect();
            CrossingSummary {
                delta,
                bp_rho: crossing(&rhos, &bp, 0.5),
                width_rho: crossing(&rhos, &width, 1.0),
            }
        })
        .collect()
}
