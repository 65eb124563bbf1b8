//! Seeded Monte-Carlo experiments built from the estimators and geometry.
//!
//! Every experiment expands into independent tasks, each with its own
//! derived seed, runs them on a rayon pool and gathers the results in task
//! order. Aggregates are computed sequentially afterwards, so outputs are
//! identical for any worker count.

pub mod config;
pub mod equivalence;
pub mod instance;
pub mod output;
pub mod svg;
pub mod sweep;
pub mod unbounded;
pub mod width;

pub use config::{
    load_config, parse_config, CellDims, CovarianceSetting, EquivalenceConfig, FitConfig,
    GridPoint, ProblemSource, SweepConfig, UnboundedConfig, Validate, WidthConfig,
    SCHEMA_VERSION,
};
pub use equivalence::{run_equivalence_experiment, EquivalenceReport};
pub use instance::{build_instance, run_fit, FitOutput};
pub use output::{emit_outputs, Emit, Format};
pub use sweep::{run_sweep, run_sweep_with, CellSummary, ReplicationRecord, SweepResult};
pub use unbounded::{run_unbounded_construction, UnboundedRunResult};
pub use width::{run_width_table, WidthRow};

use crate::error::{Error, Result};

/// Seed-derivation tags for the roles inside a replication.
pub(crate) mod tags {
    pub const PATTERN: u64 = 0x5041_5454;
    pub const WIDTH: u64 = 0x5749_4454;
    pub const RE: u64 = 0x5245_5354;
    pub const BELOW: u64 = 0x4245_4c4f;
    pub const ABOVE: u64 = 0x4142_4f56;
}

/// Options that affect scheduling but never results.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses rayon's default.
    pub workers: Option<usize>,
}

pub(crate) fn with_pool<T: Send>(options: &RunOptions, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = options.workers {
        if w == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// First `x` at which the piecewise-linear interpolant of `(xs, ys)` crosses
/// `level`, in either direction. Points with a NaN value are skipped.
pub fn crossing(xs: &[f64], ys: &[f64], level: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| !y.is_nan())
        .map(|(&x, &y)| (x, y))
        .collect();
    for w in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if y0 == level {
            return Some(x0);
        }
        if (y0 - level) * (y1 - level) < 0.0 {
            return Some(x0 + (level - y0) * (x1 - x0) / (y1 - y0));
        }
    }
    pts.last().filter(|(_, y)| *y == level).map(|(x, _)| *x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_interpolates() {
        let xs = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(crossing(&xs, &[1.0, 1.0, 0.0, 0.0], 0.5), Some(0.25));
        let near = |a: Option<f64>, b: f64| (a.unwrap() - b).abs() < 1e-12;
        assert!(near(crossing(&xs, &[0.2, 0.4, 0.6, 1.2], 1.0), 0.3 + 0.4 / 0.6 * 0.1));
        assert_eq!(crossing(&xs, &[0.2, 0.4, 0.6, 0.8], 1.0), None);
        assert!(near(crossing(&xs, &[0.2, f64::NAN, 0.6, 2.0], 1.0), 0.3 + 0.4 / 1.4 * 0.1));
        assert!(with_pool(&RunOptions { workers: Some(0) }, || ()).is_err());
    }
}
