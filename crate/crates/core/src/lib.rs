//! Numerical laboratory for the Lasso in the proportional regime.
//!
//! The crate pairs the estimators (Lasso by coordinate descent with an exact
//! path fallback, Basis Pursuit by Douglas–Rachford splitting) with the
//! geometry that governs them: the descent cone `K` of a sign pattern, its
//! Gaussian width, and the restricted-eigenvalue constant of a design over
//! `K`. The [`experiments`] module turns these into seeded, reproducible
//! Monte-Carlo sweeps.

pub mod basis_pursuit;
pub mod cone;
pub mod diagnostics;
pub mod error;
pub mod experiments;
mod homotopy;
pub mod linalg;
pub mod lasso;
pub mod problem;
pub mod problem_io;
pub mod re;
pub mod rng;

pub use basis_pursuit::{bp_solve, certify_b0_failure, BPResult, BpStatus};
pub use cone::{
    cone_membership, gaussian_width, gordon_re_prediction, project_transformed_cone, ConeSpec,
    WidthEstimate,
};
pub use diagnostics::{diagnose, lambda_path_screen, sparsity_floor_check, DiagnosticsReport};
pub use error::{Error, Result};
pub use lasso::{
    extract_active_set, kkt_certificate, lasso_fit, perturbed_fit, LassoFit, LassoSolver,
    PerturbedFit,
};
pub use problem::{
    build_covariance, sample_problem, sample_sign_pattern, Covariance, CovarianceKind,
    CovarianceSpec, ProblemConfig, RegressionProblem, SignPattern,
};
pub use re::{check_prop31_chain, prop31_bounds, re_heuristic, REBoundInputs, REEstimate};
