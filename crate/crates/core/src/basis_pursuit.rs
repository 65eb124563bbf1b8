//! Basis Pursuit `min ‖b‖₁ s.t. Xb = Xb₀`, recovery certificates, and
//! kernel directions in the interior of the descent cone.
//!
//! The solver is Douglas–Rachford splitting between soft-thresholding and
//! the exact affine projection `b ↦ b − Xᵀ(XXᵀ)⁻¹(Xb − Xb₀)`, which reuses one
//! Cholesky factor of `XXᵀ`. The projected iterate is always feasible, and
//! `(x − z)/γ` is a dual point lying in the row space of `X`, so every
//! iteration yields a duality gap. Two certificates can end a solve early:
//!
//! * a feasible iterate with `‖x‖₁ < ‖b₀‖₁ − gap_tol` proves failure;
//! * a dual vector `w` with `X_Sᵀw = s` and `‖X_{S^c}ᵀw‖_∞ < 1` proves that
//!   `b₀` is the unique minimizer.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{inf_norm, l1_norm, select_columns, soft_threshold};
use crate::problem::SignPattern;

/// Relative diagonal floor for the Cholesky factor of `XXᵀ` (rank check).
const RANK_RTOL: f64 = 1e-10;
/// Strictness margin for the dual certificate `‖X_{S^c}ᵀw‖_∞ < 1`.
const DUAL_MARGIN: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BpStatus {
    Recovered,
    FailedStrictly,
    Ambiguous,
}

impl BpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            BpStatus::Recovered => "recovered",
            BpStatus::FailedStrictly => "failed_strictly",
            BpStatus::Ambiguous => "ambiguous",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BPResult {
    #[serde(skip)]
    pub solution: DVector<f64>,
    #[serde(skip)]
    pub target: DVector<f64>,
    /// `‖b₀‖₁ − ‖b̃₀‖₁`
    pub l1_gap: f64,
    /// `‖b̃₀ − b₀‖₂`
    pub recovery_error: f64,
    /// `‖X(b̃₀ − b₀)‖₂`
    pub feasibility_residual: f64,
    pub status: BpStatus,
    pub duality_gap: f64,
    pub iterations: usize,
    /// Duality gap reached `tol` (or a certificate settled the instance).
    pub converged: bool,
    /// `b₀` was proven optimal by a dual certificate.
    pub dual_certified: bool,
}

#[derive(Clone, Debug)]
pub struct BpOptions {
    /// Relative duality-gap tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub feas_tol: f64,
    /// Douglas–Rachford step; `None` picks one from the scale of `b₀`.
    pub step: Option<f64>,
    /// Stop as soon as a strictly better feasible point is found.
    pub stop_on_failure: bool,
    /// Iterations between dual-certificate attempts.
    pub certificate_every: usize,
}

impl Default for BpOptions {
    fn default() -> Self {
        BpOptions {
            tol: 1e-9,
            max_iter: 20_000,
            feas_tol: 1e-8,
            step: None,
            stop_on_failure: false,
            certificate_every: 25,
        }
    }
}

/// `gap_tol = 1e-7 · max(1, ‖b₀‖₁)`
pub fn gap_tolerance(b0: &DVector<f64>) -> f64 {
    1e-7 * l1_norm(b0).max(1.0)
}

/// `rec_tol = 1e-6 · max(1, ‖b₀‖₂)`
pub fn recovery_tolerance(b0: &DVector<f64>) -> f64 {
    1e-6 * b0.norm().max(1.0)
}

/// Orthogonal projection onto `{b : Xb = y}` through a Cholesky factor of `XXᵀ`.
pub struct AffineProjector<'a> {
    x: &'a DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl<'a> AffineProjector<'a> {
    pub fn new(x: &'a DMatrix<f64>) -> Result<Self> {
        let gram = x * x.transpose();
        let chol = gram
            .cholesky()
            .ok_or(Error::RankDeficient("X Xᵀ is not positive definite"))?;
        let diag = chol.l_dirty().diagonal();
        let top = diag.iter().fold(0.0_f64, |m, &d| m.max(d));
        if diag.iter().any(|&d| !(d > RANK_RTOL * top)) {
            return Err(Error::RankDeficient("X does not have full row rank"));
        }
        Ok(AffineProjector { x, chol })
    }

    /// Returns `(P(z), v)` with `P(z) = z − Xᵀv`, `v = (XXᵀ)⁻¹(Xz − y)`.
    pub fn project(&self, z: &DVector<f64>, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let v = self.chol.solve(&(self.x * z - y));
        let mut out = z.clone();
        out.gemv_tr(-1.0, self.x, &v, 1.0);
        (out, v)
    }

    /// Projection onto `ker X`.
    pub fn project_kernel(&self, z: &DVector<f64>) -> DVector<f64> {
        let v = self.chol.solve(&(self.x * z));
        let mut out = z.clone();
        out.gemv_tr(-1.0, self.x, &v, 1.0);
        out
    }
}

/// Dual-certificate checker for a fixed signed support.
struct DualCertifier {
    xs: DMatrix<f64>,
    sc: Vec<usize>,
    signs: DVector<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl DualCertifier {
    fn new(x: &DMatrix<f64>, b0: &DVector<f64>) -> Self {
        let s: Vec<usize> = (0..b0.len()).filter(|&j| b0[j] != 0.0).collect();
        let sc: Vec<usize> = (0..b0.len()).filter(|&j| b0[j] == 0.0).collect();
        let xs = select_columns(x, &s);
        let signs = DVector::from_iterator(s.len(), s.iter().map(|&j| b0[j].signum()));
        // uniqueness needs X_S injective, so there is no certificate when |S| > n
        let chol = if s.is_empty() || s.len() > x.nrows() {
            None
        } else {
            xs.tr_mul(&xs).cholesky()
        };
        DualCertifier {
            xs,
            sc,
            signs,
            chol,
        }
    }

    /// Corrects `w` so that `X_Sᵀw = s` and tests strict feasibility on
    /// `S^c`. The correction is re-checked because a nearly singular `X_SᵀX_S`
    /// can factor without actually solving the system.
    fn certifies(&self, x: &DMatrix<f64>, w: &DVector<f64>) -> bool {
        let w = if self.signs.is_empty() {
            w.clone()
        } else {
            let Some(chol) = &self.chol else {
                return false;
            };
            let defect = &self.signs - self.xs.tr_mul(w);
            let corrected = w + &self.xs * chol.solve(&defect);
            if inf_norm(&(&self.signs - self.xs.tr_mul(&corrected))) > 1e-9 {
                return false;
            }
            corrected
        };
        self.sc
            .iter()
            .all(|&j| x.column(j).dot(&w).abs() < 1.0 - DUAL_MARGIN)
    }
}

fn classify(
    x: &DMatrix<f64>,
    solution: DVector<f64>,
    b0: &DVector<f64>,
    duality_gap: f64,
    iterations: usize,
    converged: bool,
    dual_certified: bool,
) -> BPResult {
    let l1_gap = l1_norm(b0) - l1_norm(&solution);
    let diff = &solution - b0;
    let recovery_error = diff.norm();
    let feasibility_residual = (x * &diff).norm();
    let status = if l1_gap >= gap_tolerance(b0) {
        BpStatus::FailedStrictly
    } else if recovery_error <= recovery_tolerance(b0) {
        BpStatus::Recovered
    } else {
        BpStatus::Ambiguous
    };
    BPResult {
        solution,
        target: b0.clone(),
        l1_gap,
        recovery_error,
        feasibility_residual,
        status,
        duality_gap,
        iterations,
        converged,
        dual_certified,
    }
}

pub fn bp_solve(x: &DMatrix<f64>, b0: &DVector<f64>, tol: f64) -> Result<BPResult> {
    bp_solve_with(
        x,
        b0,
        &BpOptions {
            tol,
            ..BpOptions::default()
        },
    )
}

pub fn bp_solve_with(x: &DMatrix<f64>, b0: &DVector<f64>, opts: &BpOptions) -> Result<BPResult> {
    let (n, p) = x.shape();
    if b0.len() != p {
        return Err(Error::DimensionMismatch {
            what: "basis pursuit target",
            expected: p,
            got: b0.len(),
        });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidConfig("basis pursuit tol must be positive".into()));
    }
    if n >= p {
        // the constraint set is the single point b0 when X is injective
        x.tr_mul(x)
            .cholesky()
            .ok_or(Error::RankDeficient("X is not injective"))?;
        return Ok(classify(x, b0.clone(), b0, 0.0, 0, true, true));
    }

    let projector = AffineProjector::new(x)?;
    let certifier = DualCertifier::new(x, b0);
    let y = x * b0;
    let b0_l1 = l1_norm(b0);
    let gap_target = opts.tol * b0_l1.max(1.0);
    let fail_level = b0_l1 - gap_tolerance(b0);

    let (mut xk, _) = projector.project(&DVector::zeros(p), &y);
    let step = opts.step.unwrap_or_else(|| {
        let scale = l1_norm(&xk) / p as f64;
        if scale > 0.0 {
            scale
        } else {
            1.0
        }
    });
    let mut z = xk.clone();
    let mut v = DVector::zeros(n);
    let mut gap = f64::INFINITY;

    for it in 0..=opts.max_iter {
        if it % opts.certificate_every.max(1) == 0 && certifier.certifies(x, &(-&v / step)) {
            return Ok(classify(x, b0.clone(), b0, 0.0, it, true, true));
        }
        let l1 = l1_norm(&xk);
        if opts.stop_on_failure && l1 < fail_level {
            return Ok(classify(x, xk, b0, gap, it, false, false));
        }
        // u = (x − z)/γ ∈ row space of X; scale into the dual ball
        let u = (&xk - &z) / step;
        let dual = b0.dot(&u) / inf_norm(&u).max(1.0);
        gap = l1 - dual;
        if gap <= gap_target {
            return Ok(classify(x, xk, b0, gap, it, true, false));
        }
        if it == opts.max_iter {
            break;
        }
        let reflected = 2.0 * &xk - &z;
        let w = reflected.map(|r| soft_threshold(r, step));
        z += &w - &xk;
        let (next, vk) = projector.project(&z, &y);
        xk = next;
        v = vk;
    }
    let cert = certifier.certifies(x, &(-&v / step));
    if cert {
        return Ok(classify(x, b0.clone(), b0, 0.0, opts.max_iter, true, true));
    }
    Ok(classify(x, xk, b0, gap, opts.max_iter, false, false))
}

#[derive(Clone, Debug, Serialize)]
pub struct InteriorDirection {
    #[serde(skip)]
    pub h0: DVector<f64>,
    /// `−(sᵀh₀ + Σ_{S^c}|h₀_j|)` with `‖h₀‖₂ = 1`
    pub margin: f64,
    /// `‖Xh₀‖₂`
    pub kernel_residual: f64,
}

#[derive(Clone, Debug)]
pub enum InteriorSearch {
    Found(InteriorDirection),
    /// No kernel direction has margin above the tolerance.
    CertifiedNone,
    /// Iteration budget exhausted; `best_margin` is the best primal margin
    /// seen and `margin_upper_bound` the dual bound on any margin.
    Stalled {
        best_margin: f64,
        margin_upper_bound: f64,
    },
}

impl InteriorSearch {
    pub fn direction(&self) -> Option<&InteriorDirection> {
        match self {
            InteriorSearch::Found(d) => Some(d),
            _ => None,
        }
    }
}

/// `sᵀh + Σ_{S^c}|h_j|`; negative exactly on the interior of `K`.
pub fn cone_excess(pattern: &SignPattern, h: &DVector<f64>) -> f64 {
    pattern
        .entries()
        .iter()
        .zip(h.iter())
        .map(|(&s, &hj)| if s == 0 { hj.abs() } else { s as f64 * hj })
        .sum()
}

/// Searches `ker X ∩ {‖h‖ ≤ 1}` for a direction with `sᵀh + Σ_{S^c}|h_j| < −tol`.
///
/// By minimax duality the best achievable margin equals
/// `min { ‖P_ker u‖ : u_S = s, |u_{S^c}| ≤ 1 }`, which is a smooth problem
/// over a box; accelerated projected gradient on it produces both primal
/// candidates `h = −P_ker u / ‖P_ker u‖` and the dual bound.
pub fn find_interior_direction(
    x: &DMatrix<f64>,
    pattern: &SignPattern,
    tol: f64,
) -> Result<InteriorSearch> {
    find_interior_direction_with(x, pattern, tol, 5_000)
}

pub fn find_interior_direction_with(
    x: &DMatrix<f64>,
    pattern: &SignPattern,
    tol: f64,
    max_iter: usize,
) -> Result<InteriorSearch> {
    let (n, p) = x.shape();
    if pattern.len() != p {
        return Err(Error::DimensionMismatch {
            what: "sign pattern length",
            expected: p,
            got: pattern.len(),
        });
    }
    if n >= p || pattern.k() == 0 {
        return Ok(InteriorSearch::CertifiedNone);
    }
    let projector = AffineProjector::new(x)?;
    let entries = pattern.entries();
    let clip = |u: &mut DVector<f64>| {
        for (uj, &s) in u.iter_mut().zip(entries) {
            *uj = if s == 0 { uj.clamp(-1.0, 1.0) } else { s as f64 };
        }
    };

    let mut u = pattern.to_vector();
    let mut prev = u.clone();
    let mut best_margin = f64::NEG_INFINITY;
    let mut bound = f64::INFINITY;
    let mut t = 1.0_f64;
    for it in 0..max_iter {
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        let look = &u + (&u - &prev) * momentum;
        let grad = projector.project_kernel(&look);
        prev = u.clone();
        u = &look - &grad;
        clip(&mut u);
        t = t_next;

        if it % 10 == 9 || it + 1 == max_iter {
            let pu = projector.project_kernel(&u);
            let norm = pu.norm();
            bound = bound.min(norm);
            if norm <= tol {
                return Ok(InteriorSearch::CertifiedNone);
            }
            let h = -pu / norm;
            let margin = -cone_excess(pattern, &h);
            best_margin = best_margin.max(margin);
            if margin > tol {
                let kernel_residual = (x * &h).norm();
                return Ok(InteriorSearch::Found(InteriorDirection {
                    h0: h,
                    margin,
                    kernel_residual,
                }));
            }
        }
    }
    Ok(InteriorSearch::Stalled {
        best_margin,
        margin_upper_bound: bound,
    })
}

#[derive(Clone, Debug)]
pub struct FailureCertificate {
    pub failed: bool,
    /// Feasible point with strictly smaller ℓ1 norm than `b₀`.
    pub witness: Option<DVector<f64>>,
    pub l1_gap: f64,
    pub tau: Option<f64>,
    pub direction: Option<InteriorDirection>,
    /// Present when the interior search did not settle the instance.
    pub bp: Option<BPResult>,
}

/// Certifies that Basis Pursuit fails to recover `b₀ = amplitude · s`.
///
/// Tries an interior kernel direction `h₀` first and moves along it,
/// halving `τ` from 1 until `‖b₀ + τh₀‖₁ < ‖b₀‖₁ − gap_tol`. Falls back to a
/// full Basis Pursuit solve otherwise.
pub fn certify_b0_failure(
    x: &DMatrix<f64>,
    pattern: &SignPattern,
    amplitude: f64,
    tol: f64,
) -> Result<FailureCertificate> {
    let (n, p) = x.shape();
    let b0 = pattern.to_vector() * amplitude;
    if n >= p {
        return Ok(FailureCertificate {
            failed: false,
            witness: None,
            l1_gap: 0.0,
            tau: None,
            direction: None,
            bp: None,
        });
    }
    let b0_l1 = l1_norm(&b0);
    let gap_tol = gap_tolerance(&b0);
    if let InteriorSearch::Found(dir) = find_interior_direction(x, pattern, tol)? {
        let mut tau = 1.0;
        for _ in 0..200 {
            let cand = &b0 + &dir.h0 * tau;
            let gap = b0_l1 - l1_norm(&cand);
            let feas = (x * (&cand - &b0)).norm();
            if gap >= gap_tol {
                if feas <= BpOptions::default().feas_tol * (1.0 + (x * &b0).norm()) {
                    return Ok(FailureCertificate {
                        failed: true,
                        witness: Some(cand),
                        l1_gap: gap,
                        tau: Some(tau),
                        direction: Some(dir),
                        bp: None,
                    });
                }
                break;
            }
            tau *= 0.5;
        }
    }
    let bp = bp_solve_with(
        x,
        &b0,
        &BpOptions {
            tol: tol.min(1e-9),
            stop_on_failure: true,
            ..BpOptions::default()
        },
    )?;
    let failed = bp.status == BpStatus::FailedStrictly;
    Ok(FailureCertificate {
        failed,
        witness: failed.then(|| bp.solution.clone()),
        l1_gap: bp.l1_gap,
        tau: None,
        direction: None,
        bp: Some(bp),
    })
}
