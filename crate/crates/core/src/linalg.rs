//! Small dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::rng::{gaussian_vector, stream_rng};

/// Pairwise (cascade) summation; the result depends only on the order of
/// `values`, never on how the caller produced them.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let (lo, hi) = values.split_at(values.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

pub fn pairwise_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(values) / values.len() as f64
}

#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

pub fn l1_norm(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Linear-interpolation quantile (R type 7) of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        len => {
            let h = (len - 1) as f64 * q.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Quantiles of `values`, NaNs dropped.
pub fn quantiles(values: &[f64], qs: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    qs.iter().map(|&q| quantile_sorted(&sorted, q)).collect()
}

/// Largest singular value of a linear map `A` by power iteration on `AᵀA`.
///
/// `normal_op` must apply `AᵀA`. The start vector is a fixed Gaussian draw,
/// so repeated calls agree bit for bit. Power iteration approaches the top
/// eigenvalue from below, so the returned value never overestimates.
pub fn power_iteration_norm<F>(dim: usize, max_iter: usize, tol: f64, normal_op: F) -> f64
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if dim == 0 {
        return 0.0;
    }
    let mut v = gaussian_vector(&mut stream_rng(0x5eed_0f_90e7, 0), dim);
    v /= v.norm();
    let mut eig = 0.0;
    for _ in 0..max_iter {
        let w = normal_op(&v);
        let rayleigh = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        let converged = (rayleigh - eig).abs() <= tol * rayleigh.abs().max(f64::MIN_POSITIVE);
        eig = rayleigh;
        if converged {
            break;
        }
    }
    eig.max(0.0).sqrt()
}

/// `‖A‖_op` by power iteration.
pub fn op_norm(a: &DMatrix<f64>, max_iter: usize, tol: f64) -> f64 {
    power_iteration_norm(a.ncols(), max_iter, tol, |v| a.tr_mul(&(a * v)))
}

/// Exact `‖A‖_op` through the eigenvalues of the smaller Gram matrix.
pub fn op_norm_exact(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let gram = if a.ncols() <= a.nrows() {
        a.tr_mul(a)
    } else {
        a * a.transpose()
    };
    let top = gram
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |m, &e| m.max(e));
    top.sqrt()
}

/// Columns `cols` of `x` as a new matrix.
pub fn select_columns(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), cols.len(), |i, j| x[(i, cols[j])])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
    }

    #[test]
    fn quantile_type7() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert!((quantile_sorted(&v, 0.25) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn power_iteration_agrees_with_exact() {
        let a = DMatrix::from_row_slice(3, 2, &[3.0, 1.0, 0.0, 2.0, 1.0, 1.0]);
        let exact = op_norm_exact(&a);
        let approx = op_norm(&a, 1000, 1e-14);
        assert!((exact - approx).abs() < 1e-8, "{exact} vs {approx}");
        assert!(approx <= exact + 1e-12);
    }
}
