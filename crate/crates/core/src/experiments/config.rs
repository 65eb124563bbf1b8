//! JSON run configurations. Every config carries `schema_version` and
//! rejects unknown keys.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{CovarianceKind, CovarianceSpec, ProblemConfig};

pub const SCHEMA_VERSION: u32 = 1;

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn yes() -> bool {
    true
}
fn width_samples_default() -> usize {
    500
}
fn restarts_default() -> usize {
    4
}
fn re_iterations_default() -> usize {
    500
}
fn support_threshold_default() -> f64 {
    0.9
}
fn risk_multiple_default() -> f64 {
    10.0
}

/// Covariance family; the dimension comes from the cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceSetting {
    pub kind: CovarianceKind,
    #[serde(default = "one")]
    pub kappa: f64,
}

impl Default for CovarianceSetting {
    fn default() -> Self {
        CovarianceSetting {
            kind: CovarianceKind::Identity,
            kappa: 1.0,
        }
    }
}

impl CovarianceSetting {
    pub fn spec(&self, p: usize) -> CovarianceSpec {
        CovarianceSpec {
            kind: self.kind.clone(),
            kappa: self.kappa,
            p,
        }
    }
}

/// Integer dimensions of one `(δ, ρ)` cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CellDims {
    pub delta: f64,
    pub rho: f64,
    pub n: usize,
    pub p: usize,
    pub k: usize,
}

impl CellDims {
    /// `p = round(n/δ)`, `k = round(ρn)`.
    pub fn new(n: usize, delta: f64, rho: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidConfig(format!("delta must be positive, got {delta}")));
        }
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::InvalidConfig(format!("rho must be nonnegative, got {rho}")));
        }
        let p = (n as f64 / delta).round();
        let k = (rho * n as f64).round();
        if p < 1.0 || p > 1e7 {
            return Err(Error::InvalidConfig(format!("cell ({delta}, {rho}) gives p = {p}")));
        }
        if k > p {
            return Err(Error::InvalidConfig(format!(
                "cell ({delta}, {rho}) gives k = {k} > p = {p}"
            )));
        }
        Ok(CellDims {
            delta,
            rho,
            n,
            p: p as usize,
            k: k as usize,
        })
    }

    pub fn problem_config(
        &self,
        lambda: f64,
        sigma: f64,
        covariance: &CovarianceSetting,
        seed: u64,
    ) -> ProblemConfig {
        ProblemConfig {
            n: self.n,
            p: self.p,
            gamma: (self.p as f64 / self.n as f64).max(1.0),
            sigma,
            lambda,
            covariance: covariance.spec(self.p),
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub delta: f64,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schema_version: u32,
    pub grid: Vec<GridPoint>,
    pub n: usize,
    #[serde(default = "half")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub covariance: CovarianceSetting,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "width_samples_default")]
    pub width_samples: usize,
    /// Fit the Lasso and compute diagnostics in each replication.
    #[serde(default = "yes")]
    pub fit_lasso: bool,
    /// Solve Basis Pursuit on the noiseless twin in each replication.
    #[serde(default = "yes")]
    pub basis_pursuit: bool,
    #[serde(default)]
    pub output_dir: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnboundedConfig {
    pub schema_version: u32,
    pub n: usize,
    pub delta: f64,
    pub rho: f64,
    #[serde(default = "half")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub covariance: CovarianceSetting,
    pub t_grid: Vec<f64>,
    pub seeds: usize,
    pub seed: u64,
    #[serde(default = "width_samples_default")]
    pub width_samples: usize,
    /// Drop the noise, so that `b* = 0` would be recovered exactly.
    #[serde(default)]
    pub noiseless: bool,
    #[serde(default)]
    pub output_dir: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BelowRegime {
    pub rho: f64,
    pub seeds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AboveRegime {
    pub rho: f64,
    pub seeds: usize,
    pub t_grid: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceConfig {
    pub schema_version: u32,
    pub n: usize,
    pub delta: f64,
    #[serde(default = "half")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub covariance: CovarianceSetting,
    pub seed: u64,
    pub below: BelowRegime,
    #[serde(default)]
    pub above: Option<AboveRegime>,
    /// Support fraction above which a fit counts as dense.
    #[serde(default = "support_threshold_default")]
    pub support_threshold: f64,
    /// Fallback yardstick: risk is "bounded" if within this multiple of the
    /// below-transition median.
    #[serde(default = "risk_multiple_default")]
    pub risk_multiple: f64,
    #[serde(default = "restarts_default")]
    pub restarts: usize,
    #[serde(default = "re_iterations_default")]
    pub re_iterations: usize,
    #[serde(default = "width_samples_default")]
    pub width_samples: usize,
    #[serde(default)]
    pub output_dir: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidthCase {
    pub p: usize,
    pub k: usize,
    /// Sample size for the normalized width; defaults to `p`.
    #[serde(default)]
    pub n: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidthConfig {
    pub schema_version: u32,
    pub cases: Vec<WidthCase>,
    #[serde(default)]
    pub covariance: CovarianceSetting,
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
}

/// Where a single instance comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSource {
    /// A problem file in the text format of [`crate::problem_io`].
    File(String),
    Generate(GeneratedProblem),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedProblem {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    #[serde(default = "half")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub covariance: CovarianceSetting,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub schema_version: u32,
    pub problem: ProblemSource,
    /// Replaces the problem's `λ` when set.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
    /// `μ` for the perturbation gap; defaults to `n^{-1/8}`.
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub include_coefficients: bool,
    #[serde(default)]
    pub output_dir: Option<String>,
}

/// Checks run after deserialization.
pub trait Validate {
    fn schema_version(&self) -> u32;
    fn validate(&self) -> Result<()>;
}

fn check_version(found: u32) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported schema_version {found} (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_count(name: &str, v: usize, min: usize) -> Result<()> {
    if v < min {
        return Err(Error::InvalidConfig(format!("{name} must be at least {min}, got {v}")));
    }
    Ok(())
}

/// Keeps generated instances at a size the dense solvers can hold.
const MAX_DIM: usize = 1 << 14;

fn check_dims(dims: &CellDims, covariance: &CovarianceSetting) -> Result<()> {
    if dims.n > MAX_DIM || dims.p > MAX_DIM {
        return Err(Error::InvalidConfig(format!(
            "dimensions n = {}, p = {} exceed {MAX_DIM}",
            dims.n, dims.p
        )));
    }
    covariance.spec(dims.p).validate()
}

fn check_t_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidConfig("t_grid must not be empty".into()));
    }
    if t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidConfig("t_grid entries must be positive".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("t_grid must be strictly increasing".into()));
    }
    Ok(())
}

fn check_common(n: usize, lambda: f64, sigma: f64, amplitude: f64) -> Result<()> {
    check_count("n", n, 2)?;
    check_positive("lambda", lambda)?;
    check_positive("sigma", sigma)?;
    check_positive("amplitude", amplitude)
}

impl SweepConfig {
    pub fn cells(&self) -> Result<Vec<CellDims>> {
        self.grid
            .iter()
            .map(|g| CellDims::new(self.n, g.delta, g.rho))
            .collect()
    }
}

impl Validate for SweepConfig {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }

    fn validate(&self) -> Result<()> {
        check_version(self.schema_version)?;
        check_common(self.n, self.lambda, self.sigma, self.amplitude)?;
        check_count("replications", self.replications, 1)?;
        check_count("width_samples", self.width_samples, 2)?;
        for dims in self.cells()? {
            check_dims(&dims, &self.covariance)?;
        }
        Ok(())
    }
}

impl UnboundedConfig {
    pub fn cell(&self) -> Result<CellDims> {
        CellDims::new(self.n, self.delta, self.rho)
    }
}

impl Validate for UnboundedConfig {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }

    fn validate(&self) -> Result<()> {
        check_version(self.schema_version)?;
        check_common(self.n, self.lambda, self.sigma, self.amplitude)?;
        check_count("seeds", self.seeds, 1)?;
        check_count("width_samples", self.width_samples, 2)?;
        check_t_grid(&self.t_grid)?;
        let dims = self.cell()?;
        check_count("k", dims.k, 1)?;
        check_dims(&dims, &self.covariance)
    }
}

impl Validate for EquivalenceConfig {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }

    fn validate(&self) -> Result<()> {
        check_version(self.schema_version)?;
        check_common(self.n, self.lambda, self.sigma, self.amplitude)?;
        check_count("below.seeds", self.below.seeds, 1)?;
        check_count("restarts", self.restarts, 1)?;
        check_count("width_samples", self.width_samples, 2)?;
        if !(self.support_threshold > 0.0 && self.support_threshold <= 1.0) {
            return Err(Error::InvalidConfig("support_threshold must lie in (0, 1]".into()));
        }
        check_positive("risk_multiple", self.risk_multiple)?;
        let dims = CellDims::new(self.n, self.delta, self.below.rho)?;
        check_count("below k", dims.k, 1)?;
        check_dims(&dims, &self.covariance)?;
        if let Some(above) = &self.above {
            check_count("above.seeds", above.seeds, 1)?;
            check_t_grid(&above.t_grid)?;
            let dims = CellDims::new(self.n, self.delta, above.rho)?;
            check_count("above k", dims.k, 1)?;
            check_dims(&dims, &self.covariance)?;
        }
        Ok(())
    }
}

impl Validate for WidthConfig {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }

    fn validate(&self) -> Result<()> {
        check_version(self.schema_version)?;
        check_count("samples", self.samples, 2)?;
        for case in &self.cases {
            let n = case.n.unwrap_or(case.p);
            check_count("p", case.p, 1)?;
            check_count("n", n, 1)?;
            if case.k > case.p {
                return Err(Error::InvalidConfig(format!("k = {} exceeds p = {}", case.k, case.p)));
            }
            check_dims(&CellDims { delta: 1.0, rho: 0.0, n, p: case.p, k: case.k }, &self.covariance)?;
        }
        Ok(())
    }
}

impl Validate for FitConfig {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }

    fn validate(&self) -> Result<()> {
        check_version(self.schema_version)?;
        if let Some(l) = self.lambda {
            check_positive("lambda", l)?;
        }
        if let Some(t) = self.tol {
            check_positive("tol", t)?;
        }
        if let Some(mu) = self.mu {
            check_positive("mu", mu)?;
        }
        if let ProblemSource::Generate(g) = &self.problem {
            check_common(g.n, g.lambda, g.sigma, g.amplitude)?;
            check_count("p", g.p, 1)?;
            if g.k > g.p {
                return Err(Error::InvalidConfig(format!("k = {} exceeds p = {}", g.k, g.p)));
            }
            check_dims(&CellDims { delta: 1.0, rho: 0.0, n: g.n, p: g.p, k: g.k }, &g.covariance)?;
        }
        Ok(())
    }
}

/// Parses and validates a config from JSON text. Never panics on malformed
/// input.
pub fn parse_config<T: DeserializeOwned + Validate>(text: &str) -> Result<T> {
    let config: T = serde_json::from_str(text)?;
    config.validate()?;
    Ok(config)
}

pub fn load_config<T: DeserializeOwned + Validate>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
