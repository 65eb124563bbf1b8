//! The reference implementations are checked on inputs with known answers
//! before anything else is compared against them.

mod support;

use nalgebra::{DMatrix, DVector};
use support::*;

#[test]
fn chi_means_match_closed_forms() {
    assert!((chi_mean(1) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
    assert!((chi_mean(2) - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-14);
    // E χ_m² = m and Var χ_m < 1/2, so E χ_m sits just below √m
    for m in [10, 100, 1000] {
        let e = chi_mean(m);
        assert!(e < (m as f64).sqrt() && e > ((m as f64) - 0.5).sqrt());
    }
}

#[test]
fn statistical_dimension_limits() {
    // no free coordinates: a half-space-like cone of dimension about p
    assert!((statistical_dimension(50, 50) - 50.0).abs() < 1e-6);
    // grows with k and stays within [k, p]
    let mut last = 0.0;
    for k in [1, 5, 20, 60, 100] {
        let d = statistical_dimension(k, 200);
        assert!(d > last && d >= k as f64 && d <= 200.0);
        last = d;
    }
    // below the classical bound 2k log(p/k) + 5k/4, and of that order
    for (k, p) in [(10usize, 100_000usize), (20, 200), (5, 1000)] {
        let d = statistical_dimension(k, p);
        let scale = 2.0 * k as f64 * (p as f64 / k as f64).ln();
        assert!(d <= scale + 1.25 * k as f64 && d >= 0.5 * scale, "{d} vs {scale}");
    }
}

#[test]
fn sign_enumeration_soft_thresholds_orthogonal_designs() {
    let x = DMatrix::<f64>::identity(4, 4) * 2.0;
    let y = DVector::from_vec(vec![3.0, -0.5, 1.0, -6.0]);
    let b = lasso_by_sign_enumeration(&x, &y, 1.0, None);
    // minimizer of 2b² − 2y_j b + |b| per coordinate: soft(2y_j, 1)/4
    let expected: Vec<f64> = y
        .iter()
        .map(|&v: &f64| (2.0 * v).signum() * ((2.0 * v).abs() - 1.0).max(0.0) / 4.0)
        .collect();
    assert!((b - DVector::from_vec(expected)).amax() < 1e-12);
}

#[test]
fn sign_enumeration_with_ridge_has_closed_form() {
    let x = DMatrix::<f64>::identity(2, 2);
    let y = DVector::from_vec(vec![2.0, 0.1]);
    let metric = DMatrix::<f64>::identity(2, 2);
    let reference = DVector::from_vec(vec![1.0, 0.0]);
    let ridge = Ridge { weight: 1.0, metric: &metric, reference: &reference };
    let b = lasso_by_sign_enumeration(&x, &y, 0.5, Some(&ridge));
    // coordinate 1: min ½(b−2)² + ½(b−1)² + ½b → b = (3 − ½)/2
    assert!((b[0] - 1.25).abs() < 1e-12);
    assert_eq!(b[1], 0.0);
}

#[test]
fn vertex_enumeration_solves_tiny_lps() {
    // b1 + b2 = 1 has minimum ℓ1 norm 1 along the whole segment
    let x = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
    assert!((l1_min_by_vertex_enumeration(&x, &DVector::from_vec(vec![1.0])) - 1.0).abs() < 1e-12);
    // b1 + 2 b2 = 2: putting everything on the larger coefficient wins
    let x = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
    assert!((l1_min_by_vertex_enumeration(&x, &DVector::from_vec(vec![2.0])) - 1.0).abs() < 1e-12);
}

#[test]
fn crossing_interpolates() {
    let xs = [0.1, 0.2, 0.3];
    assert_eq!(first_crossing(&xs, &[0.0, 0.5, 1.5], 1.0), Some(0.25));
    assert_eq!(first_crossing(&xs, &[0.0, 0.5, 0.7], 1.0), None);
    assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), 2.5);
}
