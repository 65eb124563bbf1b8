//! Gaussian-width tables.

use std::sync::Arc;

use serde::Serialize;

use super::config::{Validate, WidthConfig};
use super::{tags, with_pool, RunOptions};
use crate::cone::{gaussian_width, ConeSpec};
use crate::error::Result;
use crate::problem::{build_covariance, sample_sign_pattern};
use crate::rng::derive_seed;

/// One row of the width CSV.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct WidthRow {
    pub p: usize,
    pub n: usize,
    pub k: usize,
    pub covariance_kind: String,
    pub width_mean: f64,
    pub width_se: f64,
    pub normalized: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Estimates the width of every case. Case `i` uses seed
/// `derive_seed(seed, i)` for both its pattern and its samples.
pub fn run_width_table(config: &WidthConfig, options: &RunOptions) -> Result<Vec<WidthRow>> {
    config.validate()?;
    with_pool(options, || {
        config
            .cases
            .iter()
            .enumerate()
            .map(|(i, case)| {
                let seed = derive_seed(config.seed, i as u64);
                let spec = config.covariance.spec(case.p);
                let covariance = Arc::new(build_covariance(&spec)?);
                let pattern = sample_sign_pattern(case.p, case.k, derive_seed(seed, tags::PATTERN))?;
                let cone = ConeSpec::new(pattern, covariance)?;
                let est = gaussian_width(&cone, config.samples, seed)?;
                let n = case.n.unwrap_or(case.p);
                Ok(WidthRow {
                    p: case.p,
                    n,
                    k: case.k,
                    covariance_kind: spec.kind_name().into(),
                    width_mean: est.mean,
                    width_se: est.std_error,
                    normalized: est.normalized(n),
                    samples: est.samples,
                    seed,
                })
            })
            .collect()
    })?
}
