//! Synthetic regression problems: bounded-spectrum covariances, Gaussian
//! designs with `N(0, Σ)` rows, sign-patterned signals and Gaussian noise.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{gaussian_matrix, gaussian_vector, stream_rng};

/// Slack allowed when re-verifying the clipped spectrum.
const SPECTRUM_SLACK: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CovarianceKind {
    Identity,
    /// `Σ_ij = rho^|i-j|`
    Toeplitz { rho: f64 },
    Diagonal { values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceSpec {
    pub kind: CovarianceKind,
    pub kappa: f64,
    pub p: usize,
}

impl CovarianceSpec {
    pub fn identity(p: usize) -> Self {
        CovarianceSpec {
            kind: CovarianceKind::Identity,
            kappa: 1.0,
            p,
        }
    }

    pub fn toeplitz(p: usize, rho: f64, kappa: f64) -> Self {
        CovarianceSpec {
            kind: CovarianceKind::Toeplitz { rho },
            kappa,
            p,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            CovarianceKind::Identity => "identity",
            CovarianceKind::Toeplitz { .. } => "toeplitz",
            CovarianceKind::Diagonal { .. } => "diagonal",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidConfig("covariance dimension must be positive".into()));
        }
        if !self.kappa.is_finite() {
            return Err(Error::NonFinite("covariance kappa"));
        }
        if self.kappa < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "kappa must be >= 1 for [1/kappa, kappa] to be non-empty, got {}",
                self.kappa
            )));
        }
        match &self.kind {
            CovarianceKind::Identity => {}
            CovarianceKind::Toeplitz { rho } => {
                if !rho.is_finite() {
                    return Err(Error::NonFinite("toeplitz correlation"));
                }
                if !(0.0..1.0).contains(rho) {
                    return Err(Error::InvalidConfig(format!(
                        "toeplitz correlation must lie in [0, 1), got {rho}"
                    )));
                }
            }
            CovarianceKind::Diagonal { values } => {
                if values.len() != self.p {
                    return Err(Error::DimensionMismatch {
                        what: "diagonal covariance values",
                        expected: self.p,
                        got: values.len(),
                    });
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("diagonal covariance values"));
                }
            }
        }
        Ok(())
    }
}

/// A built covariance with its symmetric square roots.
///
/// Identity (and zero-correlation Toeplitz) covariances keep no matrices at
/// all; every product below short-circuits for them.
#[derive(Clone, Debug)]
pub struct Covariance {
    spec: CovarianceSpec,
    dense: Option<Factors>,
    eigenvalues: DVector<f64>,
}

#[derive(Clone, Debug)]
struct Factors {
    sigma: DMatrix<f64>,
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
}

impl Covariance {
    pub fn spec(&self) -> &CovarianceSpec {
        &self.spec
    }

    pub fn p(&self) -> usize {
        self.spec.p
    }

    pub fn kappa(&self) -> f64 {
        self.spec.kappa
    }

    pub fn is_identity(&self) -> bool {
        self.dense.is_none()
    }

    /// Eigenvalues of the realized `Σ` (after clipping).
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        match &self.dense {
            Some(f) => f.sigma.clone(),
            None => DMatrix::identity(self.p(), self.p()),
        }
    }

    pub fn sqrt_matrix(&self) -> DMatrix<f64> {
        match &self.dense {
            Some(f) => f.sqrt.clone(),
            None => DMatrix::identity(self.p(), self.p()),
        }
    }

    pub fn inv_sqrt_matrix(&self) -> DMatrix<f64> {
        match &self.dense {
            Some(f) => f.inv_sqrt.clone(),
            None => DMatrix::identity(self.p(), self.p()),
        }
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.dense {
            Some(f) => &f.sigma * v,
            None => v.clone(),
        }
    }

    pub fn apply_sqrt(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.dense {
            Some(f) => &f.sqrt * v,
            None => v.clone(),
        }
    }

    pub fn apply_inv_sqrt(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.dense {
            Some(f) => &f.inv_sqrt * v,
            None => v.clone(),
        }
    }

    /// `vᵀ Σ v`
    pub fn quad_form(&self, v: &DVector<f64>) -> f64 {
        match &self.dense {
            Some(f) => v.dot(&(&f.sigma * v)),
            None => v.norm_squared(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.dense {
            Some(f) => f.sigma[(i, j)],
            None => {
                if i == j {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Dense `Σ` if one is stored.
    pub(crate) fn dense_sigma(&self) -> Option<&DMatrix<f64>> {
        self.dense.as_ref().map(|f| &f.sigma)
    }

    /// `X Σ^{-1/2}`; the design with whitened rows.
    pub fn whiten_design(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.dense {
            Some(f) => x * &f.inv_sqrt,
            None => x.clone(),
        }
    }
}

/// Builds `Σ`, `Σ^{1/2}` and `Σ^{-1/2}`, clipping the spectrum into
/// `[1/kappa, kappa]` and re-verifying it afterwards.
pub fn build_covariance(spec: &CovarianceSpec) -> Result<Covariance> {
    spec.validate()?;
    let p = spec.p;
    let (lo, hi) = (1.0 / spec.kappa, spec.kappa);
    let base = match &spec.kind {
        CovarianceKind::Identity => None,
        CovarianceKind::Toeplitz { rho } if *rho == 0.0 => None,
        CovarianceKind::Toeplitz { rho } => Some(DMatrix::from_fn(p, p, |i, j| {
            rho.powi((i as i64 - j as i64).unsigned_abs() as i32)
        })),
        CovarianceKind::Diagonal { values } => Some(DMatrix::from_diagonal(
            &DVector::from_column_slice(values),
        )),
    };
    let Some(base) = base else {
        return Ok(Covariance {
            spec: spec.clone(),
            dense: None,
            eigenvalues: DVector::from_element(p, 1.0),
        });
    };

    let eig = base
        .try_symmetric_eigen(1e-15, 10_000)
        .ok_or(Error::EigenFailure)?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("covariance eigenvalues"));
    }
    let clipped = eig.eigenvalues.map(|v| v.clamp(lo, hi));
    let v = &eig.eigenvectors;
    let rebuild = |d: &DVector<f64>| {
        let m = v * DMatrix::from_diagonal(d) * v.transpose();
        (&m + m.transpose()) * 0.5
    };
    let sigma = rebuild(&clipped);
    let sqrt = rebuild(&clipped.map(f64::sqrt));
    let inv_sqrt = rebuild(&clipped.map(|x| 1.0 / x.sqrt()));
    if sigma.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("covariance matrix"));
    }

    let realized = sigma
        .clone()
        .try_symmetric_eigen(1e-15, 10_000)
        .ok_or(Error::EigenFailure)?
        .eigenvalues;
    for &ev in realized.iter() {
        if ev < lo - SPECTRUM_SLACK || ev > hi + SPECTRUM_SLACK {
            return Err(Error::SpectrumOutOfBounds {
                lower: lo,
                upper: hi,
                found: ev,
            });
        }
    }
    Ok(Covariance {
        spec: spec.clone(),
        dense: Some(Factors {
            sigma,
            sqrt,
            inv_sqrt,
        }),
        eigenvalues: realized,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub n: usize,
    pub p: usize,
    pub gamma: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub covariance: CovarianceSpec,
    pub seed: u64,
}

impl ProblemConfig {
    /// Identity-covariance config with `gamma = max(1, p/n)`.
    pub fn isotropic(n: usize, p: usize, sigma: f64, lambda: f64, seed: u64) -> Self {
        ProblemConfig {
            n,
            p,
            gamma: (p as f64 / n.max(1) as f64).max(1.0),
            sigma,
            lambda,
            covariance: CovarianceSpec::identity(p),
            seed,
        }
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    /// Checks everything except `p >= n`, which only [`satisfies_assumption`]
    /// reports: degenerate `p < n` instances are legitimate inputs here.
    ///
    /// [`satisfies_assumption`]: ProblemConfig::satisfies_assumption
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::InvalidConfig("n and p must be positive".into()));
        }
        if self.covariance.p != self.p {
            return Err(Error::DimensionMismatch {
                what: "covariance dimension",
                expected: self.p,
                got: self.covariance.p,
            });
        }
        for (name, v) in [("sigma", self.sigma), ("lambda", self.lambda), ("gamma", self.gamma)] {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be finite")));
            }
        }
        if self.sigma <= 0.0 || self.lambda <= 0.0 {
            return Err(Error::InvalidConfig("sigma and lambda must be positive".into()));
        }
        if self.gamma < 1.0 {
            return Err(Error::InvalidConfig("gamma must be >= 1".into()));
        }
        if self.aspect_ratio() > self.gamma * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "p/n = {} exceeds gamma = {}",
                self.aspect_ratio(),
                self.gamma
            )));
        }
        self.covariance.validate()
    }

    /// `1 <= p/n <= gamma`.
    pub fn satisfies_assumption(&self) -> bool {
        let r = self.aspect_ratio();
        r >= 1.0 && r <= self.gamma * (1.0 + 1e-12)
    }
}

/// A vector in `{-1, 0, +1}^p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SignPattern {
    entries: Vec<i8>,
}

impl TryFrom<Vec<i8>> for SignPattern {
    type Error = Error;

    fn try_from(entries: Vec<i8>) -> Result<Self> {
        SignPattern::new(entries)
    }
}

impl From<SignPattern> for Vec<i8> {
    fn from(s: SignPattern) -> Self {
        s.entries
    }
}

impl SignPattern {
    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if let Some(bad) = entries.iter().find(|e| !(-1..=1).contains(*e)) {
            return Err(Error::InvalidConfig(format!(
                "sign pattern entries must be -1, 0 or 1, got {bad}"
            )));
        }
        Ok(SignPattern { entries })
    }

    pub fn zeros(p: usize) -> Self {
        SignPattern {
            entries: vec![0; p],
        }
    }

    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `k = |S|`
    pub fn k(&self) -> usize {
        self.entries.iter().filter(|&&e| e != 0).count()
    }

    /// `S`, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.entries[j] != 0).collect()
    }

    /// `S^c`, ascending.
    pub fn complement(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.entries[j] == 0).collect()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.entries.iter().map(|&e| e as f64))
    }
}

/// Uniformly random support of size `k` with iid ±1 signs on it.
pub fn sample_sign_pattern(p: usize, k: usize, seed: u64) -> Result<SignPattern> {
    if k > p {
        return Err(Error::InvalidConfig(format!("k = {k} exceeds p = {p}")));
    }
    let mut rng = stream_rng(seed, 0);
    let mut support = index::sample(&mut rng, p, k).into_vec();
    support.sort_unstable();
    let mut entries = vec![0i8; p];
    for j in support {
        entries[j] = if rng.random::<bool>() { 1 } else { -1 };
    }
    Ok(SignPattern { entries })
}

/// One simulated instance `y = X b* + ε`.
#[derive(Clone, Debug)]
pub struct RegressionProblem {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub b_star: DVector<f64>,
    pub noise: DVector<f64>,
    pub config: ProblemConfig,
    pub pattern: SignPattern,
    pub covariance: Arc<Covariance>,
}

impl RegressionProblem {
    /// Assembles a problem from its parts; `y` is rebuilt from `x`, `b_star`
    /// and `noise`.
    pub fn from_parts(
        x: DMatrix<f64>,
        b_star: DVector<f64>,
        noise: DVector<f64>,
        config: ProblemConfig,
        pattern: SignPattern,
        covariance: Arc<Covariance>,
    ) -> Result<Self> {
        let (n, p) = x.shape();
        for (what, expected, got) in [
            ("design rows", config.n, n),
            ("design columns", config.p, p),
            ("b_star length", p, b_star.len()),
            ("noise length", n, noise.len()),
            ("sign pattern length", p, pattern.len()),
            ("covariance dimension", p, covariance.p()),
        ] {
            if expected != got {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    got,
                });
            }
        }
        let (y, noise) = assemble_response(&x, &b_star, &noise);
        Ok(RegressionProblem {
            x,
            y,
            b_star,
            noise,
            config,
            pattern,
            covariance,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// The penalty level `λ√n` multiplying `‖b‖₁`.
    pub fn penalty(&self) -> f64 {
        self.config.lambda * (self.n() as f64).sqrt()
    }

    /// Same design and noise, new signal.
    pub fn with_signal(&self, b_star: DVector<f64>) -> Result<Self> {
        Self::from_parts(
            self.x.clone(),
            b_star,
            self.noise.clone(),
            self.config.clone(),
            self.pattern.clone(),
            self.covariance.clone(),
        )
    }

    /// Same design and signal, `ε = 0`.
    pub fn noiseless(&self) -> Self {
        let mut twin = self.clone();
        twin.noise = DVector::zeros(self.n());
        twin.y = &self.x * &self.b_star;
        twin
    }

    /// Same design, signal and noise; different `λ`.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut other = self.clone();
        other.config.lambda = lambda;
        other
    }

    /// `‖Σ^{1/2} v‖²`
    pub fn sigma_norm_sq(&self, v: &DVector<f64>) -> f64 {
        self.covariance.quad_form(v)
    }
}

/// `y = X b + ε`, with the stored noise re-derived as `y - X b` so that the
/// identity `y - X b - ε = 0` holds exactly in floating point.
fn assemble_response(
    x: &DMatrix<f64>,
    b: &DVector<f64>,
    noise: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let signal = x * b;
    let y = &signal + noise;
    let noise = &y - &signal;
    (y, noise)
}

/// Draws `X = G Σ^{1/2}`, `b* = amplitude · s`, `ε ~ N(0, σ² I)` from the
/// config seed (design on stream 0, noise on stream 1).
pub fn sample_problem(
    config: &ProblemConfig,
    pattern: &SignPattern,
    amplitude: f64,
) -> Result<RegressionProblem> {
    let covariance = Arc::new(build_covariance(&config.covariance)?);
    sample_problem_with(config, covariance, pattern, amplitude)
}

/// [`sample_problem`] with a prebuilt covariance, shared across replications.
pub fn sample_problem_with(
    config: &ProblemConfig,
    covariance: Arc<Covariance>,
    pattern: &SignPattern,
    amplitude: f64,
) -> Result<RegressionProblem> {
    config.validate()?;
    if !(amplitude.is_finite() && amplitude > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "amplitude must be positive and finite, got {amplitude}"
        )));
    }
    if pattern.len() != config.p {
        return Err(Error::DimensionMismatch {
            what: "sign pattern length",
            expected: config.p,
            got: pattern.len(),
        });
    }
    let (n, p) = (config.n, config.p);
    let g = gaussian_matrix(&mut stream_rng(config.seed, 0), n, p);
    let x = match covariance.dense.as_ref() {
        Some(f) => g * &f.sqrt,
        None => g,
    };
    let noise = gaussian_vector(&mut stream_rng(config.seed, 1), n) * config.sigma;
    let b_star = pattern.to_vector() * amplitude;
    RegressionProblem::from_parts(x, b_star, noise, config.clone(), pattern.clone(), covariance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Eigenvalues of a symmetric 3x3 matrix from the trigonometric solution
    /// of its characteristic cubic.
    fn eig3_closed_form(a: &DMatrix<f64>) -> [f64; 3] {
        let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
        let q = (a[(0, 0)] + a[(1, 1)] + a[(2, 2)]) / 3.0;
        let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2)
            + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let b = (a - DMatrix::identity(3, 3) * q) / p;
        let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        let mut e = [e1, e2, e3];
        e.sort_by(|x, y| x.total_cmp(y));
        e
    }

    #[test]
    fn identity_covariance() {
        let c = build_covariance(&CovarianceSpec::identity(4)).unwrap();
        assert_eq!(c.matrix(), DMatrix::identity(4, 4));
        assert_eq!(c.sqrt_matrix(), DMatrix::identity(4, 4));
        assert!(c.is_identity());
    }

    #[test]
    fn zero_correlation_toeplitz_is_identity() {
        let c = build_covariance(&CovarianceSpec::toeplitz(3, 0.0, 2.0)).unwrap();
        assert_eq!(c.matrix(), DMatrix::identity(3, 3));
    }

    #[test]
    fn toeplitz_eigenvalues_match_cubic_roots() {
        let c = build_covariance(&CovarianceSpec::toeplitz(3, 0.5, 10.0)).unwrap();
        let raw = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 1.0]);
        let expected = eig3_closed_form(&raw);
        let mut got: Vec<f64> = c.eigenvalues().iter().copied().collect();
        got.sort_by(|x, y| x.total_cmp(y));
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < 1e-12, "{g} vs {e}");
            assert!((0.1..=10.0).contains(g));
        }
        // no clipping happened, so the matrix is the raw Toeplitz matrix
        assert!((c.matrix() - raw).amax() < 1e-12);
    }

    #[test]
    fn toeplitz_is_clipped_into_band() {
        // rho close to 1 has eigenvalues far below 1/kappa
        let spec = CovarianceSpec::toeplitz(30, 0.95, 2.0);
        let c = build_covariance(&spec).unwrap();
        for &e in c.eigenvalues().iter() {
            assert!(e >= 0.5 - 1e-10 && e <= 2.0 + 1e-10, "{e}");
        }
        let s = c.sqrt_matrix();
        assert!((&s * &s - c.matrix()).amax() < 1e-10);
        let w = c.inv_sqrt_matrix();
        assert!((&w * &c.matrix() * &w - DMatrix::identity(30, 30)).amax() < 1e-10);
    }

    #[test]
    fn bad_covariances_rejected() {
        assert!(build_covariance(&CovarianceSpec::toeplitz(3, 1.0, 2.0)).is_err());
        assert!(build_covariance(&CovarianceSpec::toeplitz(3, f64::NAN, 2.0)).is_err());
        assert!(build_covariance(&CovarianceSpec {
            kind: CovarianceKind::Identity,
            kappa: 0.5,
            p: 2
        })
        .is_err());
        assert!(build_covariance(&CovarianceSpec {
            kind: CovarianceKind::Diagonal {
                values: vec![1.0, f64::INFINITY]
            },
            kappa: 2.0,
            p: 2
        })
        .is_err());
    }

    #[test]
    fn sign_patterns() {
        assert_eq!(sample_sign_pattern(10, 0, 1).unwrap().k(), 0);
        let full = sample_sign_pattern(10, 10, 1).unwrap();
        assert!(full.entries().iter().all(|&e| e != 0));
        let three = sample_sign_pattern(10, 3, 42).unwrap();
        assert_eq!(three.k(), 3);
        assert_eq!(three.support().len() + three.complement().len(), 10);
        assert!(sample_sign_pattern(3, 4, 1).is_err());
        assert!(SignPattern::new(vec![0, 2]).is_err());
    }

    #[test]
    fn null_signal_gives_pure_noise() {
        let cfg = ProblemConfig::isotropic(20, 30, 1.0, 0.5, 9);
        let prob = sample_problem(&cfg, &SignPattern::zeros(30), 1.0).unwrap();
        assert!(prob.b_star.iter().all(|&b| b == 0.0));
        assert_eq!(prob.y, prob.noise);
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = ProblemConfig::isotropic(15, 25, 0.7, 0.5, 1234);
        let pat = sample_sign_pattern(25, 5, 3).unwrap();
        let a = sample_problem(&cfg, &pat, 2.0).unwrap();
        let b = sample_problem(&cfg, &pat, 2.0).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        let other = sample_problem(&ProblemConfig { seed: 1235, ..cfg }, &pat, 2.0).unwrap();
        assert_ne!(a.x, other.x);
    }

    #[test]
    fn column_variances_near_one() {
        let cfg = ProblemConfig {
            gamma: 1.0,
            ..ProblemConfig::isotropic(2000, 100, 1.0, 0.5, 77)
        };
        let prob = sample_problem(&cfg, &SignPattern::zeros(100), 1.0).unwrap();
        for j in 0..100 {
            let col = prob.x.column(j);
            let mean = col.mean();
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 1999.0;
            assert!((var - 1.0).abs() < 0.2, "column {j}: {var}");
        }
    }

    #[test]
    fn sampling_errors() {
        let cfg = ProblemConfig::isotropic(10, 20, 1.0, 0.5, 0);
        assert!(sample_problem(&cfg, &SignPattern::zeros(19), 1.0).is_err());
        assert!(sample_problem(&cfg, &SignPattern::zeros(20), 0.0).is_err());
        let too_wide = ProblemConfig { gamma: 1.5, ..cfg.clone() };
        assert!(sample_problem(&too_wide, &SignPattern::zeros(20), 1.0).is_err());
        assert!(!ProblemConfig::isotropic(10, 5, 1.0, 0.5, 0).satisfies_assumption());
        assert!(cfg.satisfies_assumption());
    }

    #[test]
    fn correlated_design_signs_follow_pattern() {
        let cfg = ProblemConfig {
            covariance: CovarianceSpec::toeplitz(12, 0.4, 3.0),
            ..ProblemConfig::isotropic(8, 12, 1.0, 0.5, 5)
        };
        let pat = sample_sign_pattern(12, 4, 11).unwrap();
        let prob = sample_problem(&cfg, &pat, 1.5).unwrap();
        for (b, s) in prob.b_star.iter().zip(pat.entries()) {
            if *b != 0.0 {
                assert_eq!(b.signum() as i8, *s);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn response_identity_is_exact(seed in any::<u64>(), n in 1usize..20, extra in 0usize..10, k in 0usize..5, amp in 0.01f64..50.0) {
            let p = n + extra;
            let k = k.min(p);
            let cfg = ProblemConfig::isotropic(n, p, 1.3, 0.5, seed);
            let pat = sample_sign_pattern(p, k, seed ^ 1).unwrap();
            let prob = sample_problem(&cfg, &pat, amp).unwrap();
            let resid = &prob.y - &prob.x * &prob.b_star - &prob.noise;
            prop_assert!(resid.iter().all(|&r| r == 0.0));
        }

        #[test]
        fn toeplitz_spectrum_within_band(rho in 0.0f64..0.99, kappa in 1.0f64..20.0, p in 1usize..25) {
            let c = build_covariance(&CovarianceSpec::toeplitz(p, rho, kappa)).unwrap();
            for &e in c.eigenvalues().iter() {
                prop_assert!(e >= 1.0 / kappa - 1e-10 && e <= kappa + 1e-10);
            }
            let m = c.matrix();
            prop_assert!((&m - m.transpose()).amax() == 0.0);
        }
    }
}
