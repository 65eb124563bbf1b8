//! Writing experiment results as CSV, JSON and SVG.
//!
//! CSV files always start with a header row, even when there are no data
//! rows, and column order is fixed by the row types below.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::equivalence::{Contingency, EquivalenceReport};
use super::svg::{heatmap, line_plot, Axes, Series};
use super::sweep::SweepResult;
use super::unbounded::UnboundedRunResult;
use super::width::WidthRow;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Csv, Format::Json, Format::Svg];

    pub fn parse(name: &str) -> Option<Format> {
        match name {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            "svg" => Some(Format::Svg),
            _ => None,
        }
    }
}

/// A result that knows how to lay itself out on disk.
pub trait Emit {
    fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>>;
    fn write_json(&self, dir: &Path) -> Result<Vec<PathBuf>>;
    fn write_svg(&self, dir: &Path) -> Result<Vec<PathBuf>>;
}

/// Writes `result` in each requested format into `dir` (created if
/// missing) and returns the files written.
pub fn emit_outputs<T: Emit + ?Sized>(result: &T, formats: &[Format], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for format in formats {
        written.extend(match format {
            Format::Csv => result.write_csv(dir)?,
            Format::Json => result.write_json(dir)?,
            Format::Svg => result.write_svg(dir)?,
        });
    }
    Ok(written)
}

fn write_file(path: PathBuf, bytes: &[u8]) -> Result<PathBuf> {
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Column names of a row type, taken from its serialized field order.
pub trait Columns {
    const COLUMNS: &'static [&'static str];
}

/// CSV bytes for `rows` under the fixed header of `T`.
pub fn csv_bytes<T: Serialize + Columns>(rows: &[T]) -> Result<Vec<u8>> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let fail = |e: csv::Error| Error::InvalidConfig(format!("csv encoding: {e}"));
    writer.write_record(T::COLUMNS).map_err(fail)?;
    for row in rows {
        writer.serialize(row).map_err(fail)?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::InvalidConfig(format!("csv encoding: {e}")))
}

pub fn write_csv_rows<T: Serialize + Columns>(path: PathBuf, rows: &[T]) -> Result<PathBuf> {
    write_file(path, &csv_bytes(rows)?)
}

fn write_json_value<T: Serialize + ?Sized>(path: PathBuf, value: &T) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

impl Columns for super::sweep::CellSummary {
    const COLUMNS: &'static [&'static str] = &[
        "cell", "delta", "rho", "n", "p", "k", "replications", "successes", "failures",
        "risk_q25", "risk_q50", "risk_q75", "support_q25", "support_q50", "support_q75",
        "lemma1_gap_pos_mean", "lasso_unconverged", "bp_runs", "bp_recovered", "bp_failed",
        "ambiguous_count", "bp_success_rate", "width_mean", "width_se", "width_normalized",
        "event_chi2_rate", "event_opnorm_rate", "sparsity_floor_rate", "cell_error",
    ];
}

impl Columns for super::sweep::ReplicationRecord {
    const COLUMNS: &'static [&'static str] = &[
        "cell", "delta", "rho", "replication", "seed", "status", "error", "df",
        "support_fraction", "risk", "l2_error", "residual_norm", "gcv", "lemma1_gap",
        "lasso_converged", "event_chi2", "event_opnorm", "sparsity_floor", "bp_status",
        "bp_iterations",
    ];
}

impl Columns for super::sweep::CrossingSummary {
    const COLUMNS: &'static [&'static str] = &["delta", "bp_rho", "width_rho"];
}

impl Columns for super::unbounded::UnboundedPoint {
    const COLUMNS: &'static [&'static str] = &[
        "t", "seeds", "risk_q25", "risk_median", "risk_q75", "support_median", "l2_median",
    ];
}

impl Columns for super::unbounded::UnboundedRecord {
    const COLUMNS: &'static [&'static str] = &[
        "seed_index", "seed", "bp_failure_certified", "t", "risk", "support_fraction",
        "l2_error", "df", "converged",
    ];
}

impl Columns for super::equivalence::BelowRecord {
    const COLUMNS: &'static [&'static str] = &[
        "seed", "support_fraction", "risk", "converged", "delta_heuristic",
        "gordon_prediction", "certified", "risk_bound", "yardstick", "bounded", "dense",
        "pivot_in_cone",
    ];
}

impl Columns for WidthRow {
    const COLUMNS: &'static [&'static str] = &[
        "p", "n", "k", "covariance_kind", "width_mean", "width_se", "normalized", "samples",
        "seed",
    ];
}

impl Columns for crate::re::Prop31Row {
    const COLUMNS: &'static [&'static str] = &[
        "seed", "k", "n", "p", "lambda", "c1", "c2", "c3", "delta_heur", "gordon_pred",
        "prerisk_bound", "prerisk_measured", "l2_bound", "l2_measured", "v_in_K",
    ];
}

#[derive(Serialize)]
struct TableRow {
    regime: &'static str,
    sparse_bounded: usize,
    sparse_large: usize,
    dense_bounded: usize,
    dense_large: usize,
    diagonal_fraction: f64,
}

impl Columns for TableRow {
    const COLUMNS: &'static [&'static str] = &[
        "regime", "sparse_bounded", "sparse_large", "dense_bounded", "dense_large",
        "diagonal_fraction",
    ];
}

impl TableRow {
    fn new(regime: &'static str, t: &Contingency) -> Self {
        TableRow {
            regime,
            sparse_bounded: t.sparse_bounded,
            sparse_large: t.sparse_large,
            dense_bounded: t.dense_bounded,
            dense_large: t.dense_large,
            diagonal_fraction: t.diagonal_fraction(),
        }
    }
}

impl Emit for SweepResult {
    fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        Ok(vec![
            write_csv_rows(dir.join("sweep_cells.csv"), &self.cells)?,
            write_csv_rows(dir.join("sweep_replications.csv"), &self.records)?,
            write_csv_rows(dir.join("sweep_crossings.csv"), &self.crossings)?,
        ])
    }

    fn write_json(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        Ok(vec![write_json_value(dir.join("sweep.json"), self)?])
    }

    fn write_svg(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let grid = |f: fn(&super::sweep::CellSummary) -> Option<f64>| -> Vec<(f64, f64, Option<f64>)> {
            self.cells.iter().map(|c| (c.delta, c.rho, f(c))).collect()
        };
        let support = heatmap(
            "median support fraction df/n",
            "delta = n/p",
            "rho = k/n",
            &grid(|c| c.support_q50),
        );
        let bp = heatmap(
            "basis pursuit success rate",
            "delta = n/p",
            "rho = k/n",
            &grid(|c| c.bp_success_rate),
        );
        Ok(vec![
            write_file(dir.join("phase_support.svg"), support.as_bytes())?,
            write_file(dir.join("phase_bp.svg"), bp.as_bytes())?,
        ])
    }
}

fn risk_plot(result: &UnboundedRunResult) -> String {
    let series = [
        Series { name: "median risk", points: result.points.iter().map(|p| (p.t, p.risk_median)).collect() },
        Series { name: "upper quartile", points: result.points.iter().map(|p| (p.t, p.risk_q75)).collect() },
        Series { name: "lower quartile", points: result.points.iter().map(|p| (p.t, p.risk_q25)).collect() },
    ];
    let axes = Axes { x_label: "signal scale t", y_label: "risk", log_x: true, log_y: true };
    line_plot("risk along b* = t b0", axes, &series)
}

fn support_plot(result: &UnboundedRunResult) -> String {
    let series = [Series {
        name: "median df/n",
        points: result.points.iter().map(|p| (p.t, p.support_median)).collect(),
    }];
    let axes = Axes { x_label: "signal scale t", y_label: "support fraction", log_x: true, log_y: false };
    line_plot("support fraction along b* = t b0", axes, &series)
}

impl Emit for UnboundedRunResult {
    fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        Ok(vec![
            write_csv_rows(dir.join("unbounded_points.csv"), &self.points)?,
            write_csv_rows(dir.join("unbounded_records.csv"), &self.records)?,
        ])
    }

    fn write_json(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        Ok(vec![write_json_value(dir.join("unbounded.json"), self)?])
    }

    fn write_svg(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        Ok(vec![
            write_file(dir.join("unbounded_risk.svg"), risk_plot(self).as_bytes())?,
            write_file(dir.join("unbounded_support.svg"), support_plot(self).as_bytes())?,
        ])
    }
}

impl Emit for EquivalenceReport {
    fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut tables = vec![TableRow::new("below", &self.below_table)];
        if let Some(t) = &self.above_table {
            tables.push(TableRow::new("above", t));
        }
        let mut out = vec![
            write_csv_rows(dir.join("equivalence_below.csv"), &self.below)?,
            write_csv_rows(dir.join("equivalence_tables.csv"), &tables)?,
            write_csv_rows(dir.join("equivalence_bounds.csv"), &self.bound_rows)?,
        ];
        if let Some(above) = &self.above {
            out.push(write_csv_rows(dir.join("equivalence_above_points.csv"), &above.points)?);
            out.push(write_csv_rows(dir.join("equivalence_above_records.csv"), &above.records)?);
        }
        Ok(out)
    }

    fn write_json(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        Ok(vec![write_json_value(dir.join("equivalence.json"), self)?])
    }

    fn write_svg(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        match &self.above {
            Some(above) => Ok(vec![write_file(
                dir.join("equivalence_above_risk.svg"),
                risk_plot(above).as_bytes(),
            )?]),
            None => Ok(Vec::new()),
        }
    }
}

impl Emit for [WidthRow] {
    fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        Ok(vec![write_csv_rows(dir.join("width.csv"), self)?])
    }

    fn write_json(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        Ok(vec![write_json_value(dir.join("width.json"), self)?])
    }

    fn write_svg(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let series = [Series {
            name: "width / sqrt(n)",
            points: self.iter().map(|r| (r.k as f64 / r.n as f64, r.normalized)).collect(),
        }];
        let axes = Axes { x_label: "k/n", y_label: "normalized width", log_x: false, log_y: false };
        let svg = line_plot("Gaussian width of the cone", axes, &series);
        Ok(vec![write_file(dir.join("width.svg"), svg.as_bytes())?])
    }
}
