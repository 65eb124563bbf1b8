//! Brute-force references shared by the integration tests. Nothing here calls
//! into the library's solvers; each routine recomputes its answer from first
//! principles on small inputs.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use phaselab::{
    build_covariance, sample_problem, sample_sign_pattern, ConeSpec, CovarianceSpec,
    ProblemConfig, RegressionProblem, SignPattern,
};
use statrs::function::gamma::ln_gamma;

/// Quadratic term added to the Lasso objective: `(w/2)(b − r)ᵀ M (b − r)`.
pub struct Ridge<'a> {
    pub weight: f64,
    pub metric: &'a DMatrix<f64>,
    pub reference: &'a DVector<f64>,
}

fn objective(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: f64,
    ridge: Option<&Ridge>,
    b: &DVector<f64>,
) -> f64 {
    let mut value = 0.5 * (x * b - y).norm_squared() + penalty * b.abs().sum();
    if let Some(r) = ridge {
        let d = b - r.reference;
        value += 0.5 * r.weight * d.dot(&(r.metric * &d));
    }
    value
}

/// Minimizes `½‖Xb − y‖² + penalty·‖b‖₁ (+ ridge)` by trying every sign
/// vector `z ∈ {−1, 0, 1}^p`: with the signs fixed the problem is an
/// unconstrained quadratic on the support, and the sign-consistent
/// stationary point with the lowest objective is the minimizer.
pub fn lasso_by_sign_enumeration(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: f64,
    ridge: Option<&Ridge>,
) -> DVector<f64> {
    let p = x.ncols();
    assert!(p <= 8, "enumeration is 3^p");
    let mut best = DVector::zeros(p);
    let mut best_value = objective(x, y, penalty, ridge, &best);
    for code in 0..3usize.pow(p as u32) {
        let mut z = vec![0i8; p];
        let mut c = code;
        for zj in z.iter_mut() {
            *zj = (c % 3) as i8 - 1;
            c /= 3;
        }
        let support: Vec<usize> = (0..p).filter(|&j| z[j] != 0).collect();
        if support.is_empty() {
            continue;
        }
        let m = support.len();
        let mut lhs = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for (a, &i) in support.iter().enumerate() {
            rhs[a] = x.column(i).dot(y) - penalty * z[i] as f64;
            for (b, &j) in support.iter().enumerate() {
                lhs[(a, b)] = x.column(i).dot(&x.column(j));
            }
        }
        if let Some(r) = ridge {
            let pull = r.metric * r.reference;
            for (a, &i) in support.iter().enumerate() {
                rhs[a] += r.weight * pull[i];
                for (b, &j) in support.iter().enumerate() {
                    lhs[(a, b)] += r.weight * r.metric[(i, j)];
                }
            }
        }
        let Some(chol) = lhs.cholesky() else { continue };
        let sol = chol.solve(&rhs);
        if support.iter().enumerate().any(|(a, &i)| sol[a] * z[i] as f64 <= 0.0) {
            continue;
        }
        let mut b = DVector::zeros(p);
        for (a, &i) in support.iter().enumerate() {
            b[i] = sol[a];
        }
        let value = objective(x, y, penalty, ridge, &b);
        if value < best_value {
            best_value = value;
            best = b;
        }
    }
    best
}

/// `min ‖b‖₁ s.t. Xb = target` as the LP `min 1ᵀ(u + w)`, `X(u − w) = target`,
/// `u, w ≥ 0`, solved by visiting every basic feasible solution.
pub fn l1_min_by_vertex_enumeration(x: &DMatrix<f64>, target: &DVector<f64>) -> f64 {
    let (n, p) = x.shape();
    let cols = 2 * p;
    let column = |c: usize| -> DVector<f64> {
        if c < p {
            x.column(c).into_owned()
        } else {
            -x.column(c - p).into_owned()
        }
    };
    let mut best = f64::INFINITY;
    let mut basis: Vec<usize> = (0..n).collect();
    loop {
        let mut a = DMatrix::zeros(n, n);
        for (i, &c) in basis.iter().enumerate() {
            a.set_column(i, &column(c));
        }
        let lu = a.clone().lu();
        if a.determinant().abs() > 1e-10 {
            if let Some(sol) = lu.solve(target) {
                if sol.iter().all(|&v| v >= -1e-10) {
                    best = best.min(sol.iter().map(|v| v.max(0.0)).sum());
                }
            }
        }
        // next n-combination of 0..cols
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if basis[i] < cols - n + i {
                break;
            }
        }
        basis[i] += 1;
        for j in i + 1..n {
            basis[j] = basis[j - 1] + 1;
        }
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let m = intervals + intervals % 2;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iterations: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..iterations {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    f(0.5 * (lo + hi))
}

/// `E[(|g| − τ)₊²]` for a standard normal `g`.
fn soft_threshold_second_moment(tau: f64) -> f64 {
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    2.0 * simpson(|x| (x - tau).powi(2) * phi(x), tau, tau + 14.0, 4000)
}

/// Statistical dimension of the ℓ1 descent cone with `k` signed entries
/// out of `p`: `inf_{τ ≥ 0} k(1 + τ²) + (p − k)·E[(|g| − τ)₊²]`.
pub fn statistical_dimension(k: usize, p: usize) -> f64 {
    let (k, p) = (k as f64, p as f64);
    golden_section(
        |tau| k * (1.0 + tau * tau) + (p - k) * soft_threshold_second_moment(tau),
        0.0,
        12.0,
        100,
    )
}

/// `E χ_m = √2 Γ((m+1)/2) / Γ(m/2)`.
pub fn chi_mean(m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let m = m as f64;
    2f64.sqrt() * (ln_gamma((m + 1.0) / 2.0) - ln_gamma(m / 2.0)).exp()
}

/// Expected norm of the projection of `g ~ N(0, I_p)` onto a half-space
/// through the origin: half the time the whole vector is kept, otherwise its
/// normal component is dropped.
pub fn half_space_width(p: usize) -> f64 {
    0.5 * (chi_mean(p) + chi_mean(p - 1))
}

pub fn identity_cone(pattern: SignPattern) -> ConeSpec {
    let p = pattern.len();
    ConeSpec::new(pattern, Arc::new(build_covariance(&CovarianceSpec::identity(p)).unwrap()))
        .unwrap()
}

/// Isotropic instance with a random `k`-sparse sign pattern, `b* = s`.
pub fn isotropic_problem(n: usize, p: usize, k: usize, lambda: f64, seed: u64) -> RegressionProblem {
    let pattern = sample_sign_pattern(p, k, seed ^ 0x9e37_79b9).unwrap();
    let config = ProblemConfig::isotropic(n, p, 1.0, lambda, seed);
    sample_problem(&config, &pattern, 1.0).unwrap()
}

/// Operator norm from the full SVD.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// First level crossing of a piecewise-linear curve, increasing `xs`.
pub fn first_crossing(xs: &[f64], ys: &[f64], level: f64) -> Option<f64> {
    for i in 1..xs.len() {
        let (a, b) = (ys[i - 1] - level, ys[i] - level);
        if a == 0.0 {
            return Some(xs[i - 1]);
        }
        if a * b < 0.0 || b == 0.0 {
            return Some(xs[i - 1] + (xs[i] - xs[i - 1]) * a / (a - b));
        }
    }
    None
}
