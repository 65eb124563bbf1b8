//! The cone `K = {h : Σ_{j∈S^c}|h_j| ≤ −sᵀh}` of a sign pattern, projections
//! onto its image `C = Σ^{1/2}K`, and its Gaussian width.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::basis_pursuit::cone_excess;
use crate::error::{Error, Result};
use crate::linalg::{pairwise_mean, soft_threshold};
use crate::problem::{Covariance, SignPattern};
use crate::rng::{gaussian_vector, stream_rng};

const BISECTION_STEPS: usize = 60;
const INNER_MAX_SWEEPS: usize = 20_000;

/// Default failure probability behind the Gordon deviation term `t`.
pub const DEFAULT_DELTA_FAIL: f64 = 0.01;

#[derive(Clone, Debug)]
pub struct ConeSpec {
    pattern: SignPattern,
    covariance: Arc<Covariance>,
}

impl ConeSpec {
    pub fn new(pattern: SignPattern, covariance: Arc<Covariance>) -> Result<Self> {
        if pattern.len() != covariance.p() {
            return Err(Error::DimensionMismatch {
                what: "sign pattern length",
                expected: covariance.p(),
                got: pattern.len(),
            });
        }
        Ok(ConeSpec {
            pattern,
            covariance,
        })
    }

    pub fn pattern(&self) -> &SignPattern {
        &self.pattern
    }

    pub fn covariance(&self) -> &Arc<Covariance> {
        &self.covariance
    }

    pub fn p(&self) -> usize {
        self.pattern.len()
    }

    pub fn k(&self) -> usize {
        self.pattern.k()
    }

    /// `K = {0}` when the pattern has no nonzero sign.
    pub fn is_trivial(&self) -> bool {
        self.k() == 0
    }

    /// `sᵀh + Σ_{S^c}|h_j|`
    pub fn excess(&self, h: &DVector<f64>) -> f64 {
        cone_excess(&self.pattern, h)
    }
}

/// `Σ_{S^c}|h_j| + sᵀh ≤ tol·‖h‖₂`
pub fn cone_membership(cone: &ConeSpec, h: &DVector<f64>, tol: f64) -> bool {
    cone.excess(h) <= tol * h.norm()
}

#[derive(Clone, Debug)]
pub struct ConeProjection {
    /// `u* = Π_C(g)`
    pub point: DVector<f64>,
    /// `h* = Σ^{-1/2} u* ∈ K`
    pub preimage: DVector<f64>,
    /// Multiplier `ν ≥ 0` of the constraint `sᵀh + Σ_{S^c}|h_j| ≤ 0`.
    pub multiplier: f64,
    /// Constraint value at `h*`.
    pub excess: f64,
}

/// Euclidean projection of `g` onto `C = Σ^{1/2}K`.
///
/// Bisects on the multiplier `ν` of the cone constraint. For a fixed `ν` the
/// Lagrangian is minimized in `h`: in closed form for `Σ = I`
/// (`h_S = g_S − νs_S`, `h_{S^c} = soft(g_{S^c}, ν)`), by coordinate descent
/// otherwise. The constraint value is non-increasing in `ν`; a violation of
/// that monotonicity is reported as an error.
pub fn project_transformed_cone(
    cone: &ConeSpec,
    g: &DVector<f64>,
    tol: f64,
) -> Result<ConeProjection> {
    let p = cone.p();
    if g.len() != p {
        return Err(Error::DimensionMismatch {
            what: "projection input",
            expected: p,
            got: g.len(),
        });
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("projection input"));
    }
    if cone.is_trivial() {
        return Ok(ConeProjection {
            point: DVector::zeros(p),
            preimage: DVector::zeros(p),
            multiplier: 0.0,
            excess: 0.0,
        });
    }
    let mut inner = InnerSolver::new(cone, g, tol);
    let h0 = inner.solve(0.0);
    let c0 = cone.excess(&h0);
    if c0 <= 0.0 {
        return Ok(ConeProjection {
            point: g.clone(),
            preimage: h0,
            multiplier: 0.0,
            excess: c0,
        });
    }

    // grow the bracket until the constraint holds
    let mut lo = 0.0;
    let mut c_lo = c0;
    let mut hi = (c0 / cone.k() as f64).max(f64::MIN_POSITIVE);
    let mut h_hi = inner.solve(hi);
    let mut c_hi = cone.excess(&h_hi);
    let mut grow = 0;
    while c_hi > 0.0 {
        if c_hi > c_lo * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::ProjectionFailure(format!(
                "constraint increased from {c_lo} to {c_hi} while growing the bracket"
            )));
        }
        lo = hi;
        c_lo = c_hi;
        hi *= 2.0;
        h_hi = inner.solve(hi);
        c_hi = cone.excess(&h_hi);
        grow += 1;
        if grow > 200 {
            return Err(Error::ProjectionFailure("multiplier bracket did not close".into()));
        }
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let h_mid = inner.solve(mid);
        let c_mid = cone.excess(&h_mid);
        let slack = 1e-7 * (c_lo.abs() + c_hi.abs()) + inner.accuracy();
        if c_mid > c_lo + slack || c_mid < c_hi - slack {
            return Err(Error::ProjectionFailure(format!(
                "constraint value not monotone in the multiplier near {mid}"
            )));
        }
        if c_mid > 0.0 {
            lo = mid;
            c_lo = c_mid;
        } else {
            hi = mid;
            h_hi = h_mid;
            c_hi = c_mid;
        }
    }
    let (mut nu, mut h) = (hi, h_hi);
    if let Some((nu_exact, h_exact)) = inner.exact_identity_root(cone, hi) {
        nu = nu_exact;
        h = h_exact;
    }
    let excess = cone.excess(&h);
    Ok(ConeProjection {
        point: cone.covariance.apply_sqrt(&h),
        preimage: h,
        multiplier: nu,
        excess,
    })
}

/// Minimizes `½hᵀΣh − hᵀΣ^{1/2}g + ν(sᵀh + Σ_{S^c}|h_j|)` over `h`.
struct InnerSolver<'a> {
    signs: Vec<f64>,
    target: DVector<f64>,
    sigma: Option<&'a DMatrix<f64>>,
    warm: DVector<f64>,
    tol: f64,
}

impl<'a> InnerSolver<'a> {
    fn new(cone: &'a ConeSpec, g: &DVector<f64>, tol: f64) -> Self {
        let sigma = cone.covariance.dense_sigma();
        let target = cone.covariance.apply_sqrt(g);
        let warm = cone.covariance.apply_inv_sqrt(g);
        InnerSolver {
            signs: cone.pattern.entries().iter().map(|&s| s as f64).collect(),
            target,
            sigma,
            warm,
            tol: tol.max(1e-14),
        }
    }

    /// Resolution of the constraint value given the inner stopping rule.
    fn accuracy(&self) -> f64 {
        match self.sigma {
            Some(_) => 1e3 * self.tol * self.target.len() as f64 * self.target.amax().max(1.0),
            None => 1e-300,
        }
    }

    fn solve(&mut self, nu: f64) -> DVector<f64> {
        let Some(sigma) = self.sigma else {
            return DVector::from_iterator(
                self.target.len(),
                self.target.iter().zip(&self.signs).map(|(&g, &s)| {
                    if s == 0.0 {
                        soft_threshold(g, nu)
                    } else {
                        g - nu * s
                    }
                }),
            );
        };
        let p = self.target.len();
        let mut h = self.warm.clone();
        let mut sh = sigma * &h;
        let scale = self.target.amax().max(nu).max(1.0);
        for _ in 0..INNER_MAX_SWEEPS {
            let mut moved = 0.0_f64;
            for j in 0..p {
                let d = sigma[(j, j)];
                let z = self.target[j] - sh[j] + d * h[j];
                let new = if self.signs[j] == 0.0 {
                    soft_threshold(z, nu) / d
                } else {
                    (z - nu * self.signs[j]) / d
                };
                let delta = new - h[j];
                if delta != 0.0 {
                    sh.axpy(delta, &sigma.column(j), 1.0);
                    h[j] = new;
                    moved = moved.max(delta.abs() * d);
                }
            }
            if moved <= self.tol * scale {
                break;
            }
        }
        self.warm = h.clone();
        h
    }

    /// For `Σ = I` the constraint is piecewise linear in `ν`; given the set of
    /// surviving `S^c` coordinates at `ν ≈ ν*`, solve for the root directly.
    fn exact_identity_root(&self, cone: &ConeSpec, near: f64) -> Option<(f64, DVector<f64>)> {
        if self.sigma.is_some() {
            return None;
        }
        let mut num = 0.0;
        let mut den = cone.k() as f64;
        for (&g, &s) in self.target.iter().zip(&self.signs) {
            if s != 0.0 {
                num += s * g;
            } else if g.abs() > near {
                num += g.abs();
                den += 1.0;
            }
        }
        let nu = num / den;
        let consistent = self
            .target
            .iter()
            .zip(&self.signs)
            .filter(|(_, &s)| s == 0.0)
            .all(|(&g, _)| (g.abs() > near) == (g.abs() > nu));
        if !consistent || !(nu > 0.0) {
            return None;
        }
        let h = DVector::from_iterator(
            self.target.len(),
            self.target.iter().zip(&self.signs).map(|(&g, &s)| {
                if s == 0.0 {
                    soft_threshold(g, nu)
                } else {
                    g - nu * s
                }
            }),
        );
        Some((nu, h))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WidthEstimate {
    /// Monte-Carlo mean of `‖Π_C(g)‖₂`
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
    /// Monte-Carlo mean of `‖Π_C(g)‖₂²` (statistical dimension of `C`)
    pub mean_sq: f64,
    pub mean_sq_std_error: f64,
    pub seed: u64,
}

impl WidthEstimate {
    /// `𝒢 / √n`
    pub fn normalized(&self, n: usize) -> f64 {
        self.mean / (n as f64).sqrt()
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let mean = pairwise_mean(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = crate::linalg::pairwise_sum(&dev) / (values.len() - 1) as f64;
    (mean, (var / values.len() as f64).sqrt())
}

/// Monte-Carlo estimate of `𝒢(K, Σ) = E sup_{u ∈ C, ‖u‖ = 1} uᵀg`.
///
/// Each sample uses `‖Π_C(g)‖₂`, which equals the supremum whenever the
/// projection is nonzero; samples with `Π_C(g) = 0` contribute 0 (where the
/// supremum would be negative). Sample `i` is drawn from stream `i` of
/// `seed`, and the mean is a pairwise sum in sample order, so the estimate
/// does not depend on the thread count.
pub fn gaussian_width(cone: &ConeSpec, samples: usize, seed: u64) -> Result<WidthEstimate> {
    if samples < 2 {
        return Err(Error::InvalidConfig("gaussian width needs at least 2 samples".into()));
    }
    if cone.is_trivial() {
        return Ok(WidthEstimate {
            mean: 0.0,
            std_error: 0.0,
            samples,
            mean_sq: 0.0,
            mean_sq_std_error: 0.0,
            seed,
        });
    }
    let p = cone.p();
    let norms: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let g = gaussian_vector(&mut stream_rng(seed, i as u64), p);
            project_transformed_cone(cone, &g, 1e-12).map(|proj| proj.point.norm())
        })
        .collect::<Result<_>>()?;
    let squares: Vec<f64> = norms.iter().map(|v| v * v).collect();
    let (mean, std_error) = mean_and_se(&norms);
    let (mean_sq, mean_sq_std_error) = mean_and_se(&squares);
    Ok(WidthEstimate {
        mean,
        std_error,
        samples,
        mean_sq,
        mean_sq_std_error,
        seed,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GordonPrediction {
    /// `(√(n−1) − 𝒢 − t)/√n`: lower bound on `inf_{h∈K, hᵀΣh=1} ‖Xh‖/√n`
    pub restricted_min: f64,
    /// `(√(n−1) − 𝒢 − t)/√(nκ)`: the implied restricted-eigenvalue constant
    pub re_constant: f64,
    pub t: f64,
}

/// `t = √(2 log(1/δ))`: the Gordon bound then holds with probability `1 − δ`.
pub fn gordon_deviation(delta_fail: f64) -> f64 {
    (2.0 * (1.0 / delta_fail).ln()).sqrt()
}

/// Escape-through-a-mesh prediction from a width value. Negative results mean
/// no guarantee.
pub fn gordon_from_width(width: f64, n: usize, t: f64, kappa: f64) -> GordonPrediction {
    let slack = ((n as f64) - 1.0).max(0.0).sqrt() - width - t;
    let sqrt_n = (n as f64).sqrt();
    GordonPrediction {
        restricted_min: slack / sqrt_n,
        re_constant: slack / (sqrt_n * kappa.sqrt()),
        t,
    }
}

pub fn gordon_re_prediction(
    cone: &ConeSpec,
    width: &WidthEstimate,
    n: usize,
    t: f64,
) -> GordonPrediction {
    gordon_from_width(width.mean, n, t, cone.covariance.kappa())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{build_covariance, sample_sign_pattern, CovarianceSpec};
    use proptest::prelude::*;

    fn iso_cone(entries: Vec<i8>) -> ConeSpec {
        let p = entries.len();
        ConeSpec::new(
            SignPattern::new(entries).unwrap(),
            Arc::new(build_covariance(&CovarianceSpec::identity(p)).unwrap()),
        )
        .unwrap()
    }

    fn toeplitz_cone(p: usize, k: usize, seed: u64) -> ConeSpec {
        ConeSpec::new(
            sample_sign_pattern(p, k, seed).unwrap(),
            Arc::new(build_covariance(&CovarianceSpec::toeplitz(p, 0.5, 4.0)).unwrap()),
        )
        .unwrap()
    }

    /// Normal-cone conditions of the projection program, checked through the
    /// multiplier (Σ = I).
    fn assert_projection_kkt(cone: &ConeSpec, g: &DVector<f64>, proj: &ConeProjection) {
        let nu = proj.multiplier;
        assert!(nu >= 0.0);
        assert!(nu * proj.excess.abs() <= 1e-7 * (1.0 + g.norm()));
        assert!(proj.excess <= 1e-9 * (1.0 + g.norm()));
        for (j, &s) in cone.pattern().entries().iter().enumerate() {
            let r = g[j] - proj.point[j];
            if s != 0 {
                assert!((r - nu * s as f64).abs() <= 1e-7, "S coord {j}");
            } else if proj.point[j] != 0.0 {
                assert!((r - nu * proj.point[j].signum()).abs() <= 1e-7, "S^c coord {j}");
            } else {
                assert!(r.abs() <= nu + 1e-7, "S^c zero coord {j}");
            }
        }
    }

    #[test]
    fn membership_examples() {
        let cone = iso_cone(vec![1, -1, 0, 0]);
        let s = cone.pattern().to_vector();
        assert!(cone_membership(&cone, &(-&s), 0.0));
        assert!(!cone_membership(&cone, &s, 0.0));
        let off = DVector::from_vec(vec![0.0, 0.0, 1.0, -0.5]);
        assert!(!cone_membership(&cone, &off, 1e-9));
    }

    #[test]
    fn members_are_fixed_points() {
        let cone = iso_cone(vec![1, -1, 0, 0]);
        let g = DVector::from_vec(vec![-2.0, 2.0, 0.5, -0.5]);
        let proj = project_transformed_cone(&cone, &g, 1e-12).unwrap();
        assert_eq!(proj.point, g);
    }

    #[test]
    fn trivial_cone_projects_to_zero() {
        let cone = iso_cone(vec![0, 0, 0]);
        let proj = project_transformed_cone(&cone, &DVector::from_vec(vec![1.0, -2.0, 3.0]), 1e-12)
            .unwrap();
        assert!(proj.point.iter().all(|&v| v == 0.0));
        let w = gaussian_width(&cone, 10, 1).unwrap();
        assert_eq!(w.mean, 0.0);
    }

    #[test]
    fn two_dimensional_boundary_point() {
        // s = (−1, 0): K = {|h₂| ≤ h₁}; (1, 1) lies on its boundary
        let cone = iso_cone(vec![-1, 0]);
        let g = DVector::from_vec(vec![1.0, 1.0]);
        let proj = project_transformed_cone(&cone, &g, 1e-12).unwrap();
        assert!((&proj.point - &g).amax() < 1e-12);
        // grid search over the cone confirms (1, 1) is the nearest member
        let mut best = f64::INFINITY;
        for i in 0..=400 {
            for j in -400..=400 {
                let (a, b) = (i as f64 * 0.01, j as f64 * 0.01);
                if b.abs() <= a {
                    best = best.min((a - 1.0).powi(2) + (b - 1.0).powi(2));
                }
            }
        }
        assert!(best < 1e-12);
        // a point outside: (0, 1) projects to (½, ½)
        let proj = project_transformed_cone(&cone, &DVector::from_vec(vec![0.0, 1.0]), 1e-12)
            .unwrap();
        assert!((proj.point[0] - 0.5).abs() < 1e-12 && (proj.point[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn half_space_projection_matches_closed_form() {
        let cone = iso_cone(vec![1; 6]);
        let g = DVector::from_vec(vec![0.3, -0.1, 0.7, 0.2, -0.4, 0.5]);
        let proj = project_transformed_cone(&cone, &g, 1e-12).unwrap();
        let s = cone.pattern().to_vector();
        let expected = &g - &s * (s.dot(&g).max(0.0) / 6.0);
        assert!((proj.point - expected).amax() < 1e-12);
    }

    #[test]
    fn correlated_projection_is_a_projection() {
        let cone = toeplitz_cone(12, 3, 4);
        let g = gaussian_vector(&mut stream_rng(5, 0), 12);
        let proj = project_transformed_cone(&cone, &g, 1e-12).unwrap();
        assert!(cone_membership(&cone, &proj.preimage, 1e-8));
        // (g − u) is orthogonal to u and makes an obtuse angle with C
        let r = &g - &proj.point;
        assert!(r.dot(&proj.point).abs() < 1e-6 * (1.0 + g.norm_squared()));
        for i in 0..200 {
            let h = gaussian_vector(&mut stream_rng(6, i), 12);
            let member = project_transformed_cone(&cone, &h, 1e-12).unwrap().point;
            assert!(r.dot(&member) <= 1e-6 * (1.0 + member.norm() * r.norm()));
        }
        let again = project_transformed_cone(&cone, &proj.point, 1e-12).unwrap();
        assert!((again.point - &proj.point).amax() < 1e-6);
    }

    #[test]
    fn width_needs_two_samples() {
        assert!(gaussian_width(&iso_cone(vec![1, 0]), 1, 0).is_err());
    }

    #[test]
    fn gordon_trivial_cases() {
        let pred = gordon_from_width(0.0, 100, 0.0, 1.0);
        assert!((pred.restricted_min - (99f64).sqrt() / 10.0).abs() < 1e-15);
        assert!(gordon_from_width(10.0, 101, 0.0, 1.0).restricted_min <= 0.0);
        let pred = gordon_from_width(3.0, 100, 1.0, 4.0);
        assert!((pred.re_constant - pred.restricted_min / 2.0).abs() < 1e-15);
        assert!((gordon_deviation(0.01) - (2.0 * 100f64.ln()).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn width_is_reproducible() {
        let cone = iso_cone(vec![1, 0, -1, 0, 0, 1, 0, 0]);
        let a = gaussian_width(&cone, 50, 3).unwrap();
        let b = gaussian_width(&cone, 50, 3).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn projection_properties(seed in any::<u64>(), p in 2usize..30, kfrac in 0.0f64..1.0) {
            let k = ((p as f64) * kfrac) as usize;
            let pat = sample_sign_pattern(p, k, seed).unwrap();
            let cone = iso_cone(pat.entries().to_vec());
            let g = gaussian_vector(&mut stream_rng(seed, 1), p);
            let proj = project_transformed_cone(&cone, &g, 1e-12).unwrap();
            prop_assert!(proj.point.norm() <= g.norm() + 1e-12);
            if k > 0 {
                assert_projection_kkt(&cone, &g, &proj);
            }
            for alpha in [0.5, 2.0] {
                let scaled = project_transformed_cone(&cone, &(&g * alpha), 1e-12).unwrap();
                prop_assert!((scaled.point - &proj.point * alpha).amax() <= 1e-9 * (1.0 + g.amax()));
            }
            let again = project_transformed_cone(&cone, &proj.point, 1e-12).unwrap();
            prop_assert!((again.point - &proj.point).amax() <= 1e-9 * (1.0 + g.amax()));
        }

        #[test]
        fn correlated_projection_homogeneous(seed in any::<u64>(), p in 3usize..12) {
            let cone = toeplitz_cone(p, p / 3 + 1, seed);
            let g = gaussian_vector(&mut stream_rng(seed, 2), p);
            let proj = project_transformed_cone(&cone, &g, 1e-12).unwrap();
            prop_assert!(proj.point.norm() <= g.norm() + 1e-8);
            let doubled = project_transformed_cone(&cone, &(&g * 2.0), 1e-12).unwrap();
            prop_assert!((doubled.point - &proj.point * 2.0).amax() <= 1e-6 * (1.0 + g.amax()));
        }
    }
}
