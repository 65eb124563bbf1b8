//! Plain-text problem files.
//!
//! ```text
//! phaselab-problem 1
//! n <rows>
//! p <cols>
//! seed <u64>
//! config <ProblemConfig as one-line JSON>
//! pattern <p entries in {-1,0,1}>
//! X
//! <n lines, p numbers each, row-major>
//! y
//! <n numbers>
//! b_star
//! <p numbers>
//! noise
//! <n numbers>
//! end
//! ```
//!
//! Numbers are written in Rust's shortest round-trip form, so a problem
//! written and read back is bit-identical.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{build_covariance, ProblemConfig, RegressionProblem, SignPattern};

pub const MAGIC: &str = "phaselab-problem";
pub const FORMAT_VERSION: u32 = 1;

/// Inputs with more cells than this are rejected before allocation.
pub const MAX_CELLS: usize = 1 << 26;

/// The parsed contents of a problem file, before the covariance is built.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemRecord {
    pub config: ProblemConfig,
    pub pattern: SignPattern,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub b_star: DVector<f64>,
    pub noise: DVector<f64>,
}

impl ProblemRecord {
    pub fn from_problem(problem: &RegressionProblem) -> Self {
        ProblemRecord {
            config: problem.config.clone(),
            pattern: problem.pattern.clone(),
            x: problem.x.clone(),
            y: problem.y.clone(),
            b_star: problem.b_star.clone(),
            noise: problem.noise.clone(),
        }
    }

    /// Builds the covariance and checks `y ≈ X b* + ε`.
    pub fn into_problem(self) -> Result<RegressionProblem> {
        self.config.validate()?;
        let covariance = Arc::new(build_covariance(&self.config.covariance)?);
        let resid = &self.y - &self.x * &self.b_star - &self.noise;
        let scale = 1.0 + self.y.amax() + (&self.x * &self.b_star).amax();
        if resid.amax() > 1e-9 * scale {
            return Err(Error::Parse {
                line: 0,
                msg: format!("y differs from X b_star + noise by {}", resid.amax()),
            });
        }
        Ok(RegressionProblem {
            x: self.x,
            y: self.y,
            b_star: self.b_star,
            noise: self.noise,
            config: self.config,
            pattern: self.pattern,
            covariance,
        })
    }
}

fn push_row<'a>(out: &mut String, values: impl Iterator<Item = &'a f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        write!(out, "{v:?}").expect("writing to a String cannot fail");
    }
    out.push('\n');
}

pub fn write_problem_text(record: &ProblemRecord) -> Result<String> {
    let (n, p) = record.x.shape();
    let mut out = String::new();
    writeln!(out, "{MAGIC} {FORMAT_VERSION}").unwrap();
    writeln!(out, "n {n}").unwrap();
    writeln!(out, "p {p}").unwrap();
    writeln!(out, "seed {}", record.config.seed).unwrap();
    writeln!(out, "config {}", serde_json::to_string(&record.config)?).unwrap();
    let pattern: Vec<String> = record.pattern.entries().iter().map(|e| e.to_string()).collect();
    writeln!(out, "pattern {}", pattern.join(" ")).unwrap();
    out.push_str("X\n");
    for i in 0..n {
        let row: Vec<f64> = record.x.row(i).iter().copied().collect();
        push_row(&mut out, row.iter());
    }
    out.push_str("y\n");
    push_row(&mut out, record.y.iter());
    out.push_str("b_star\n");
    push_row(&mut out, record.b_star.iter());
    out.push_str("noise\n");
    push_row(&mut out, record.noise.iter());
    out.push_str("end\n");
    Ok(out)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim_end_matches('\r'))
            }
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest),
            _ => Err(self.err(format!("expected `{key} <value>`"))),
        }
    }

    fn marker(&mut self, key: &str) -> Result<()> {
        if self.next()? == key {
            Ok(())
        } else {
            Err(self.err(format!("expected `{key}`")))
        }
    }

    fn numbers(&mut self, expected: usize) -> Result<Vec<f64>> {
        let line = self.next()?;
        let mut out = Vec::with_capacity(expected);
        for tok in line.split_ascii_whitespace() {
            if out.len() == expected {
                return Err(self.err(format!("more than {expected} values")));
            }
            let v: f64 = tok
                .parse()
                .map_err(|_| self.err(format!("bad number `{tok}`")))?;
            if !v.is_finite() {
                return Err(self.err("non-finite value"));
            }
            out.push(v);
        }
        if out.len() != expected {
            return Err(self.err(format!("expected {expected} values, got {}", out.len())));
        }
        Ok(out)
    }
}

fn parse_count(lines: &Lines<'_>, s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| lines.err(format!("bad count `{s}`")))
}

/// Parses a problem file. Never panics on malformed input.
pub fn parse_problem_text(text: &str) -> Result<ProblemRecord> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let header = lines.next()?;
    match header.split_once(' ') {
        Some((MAGIC, v)) if v.trim() == FORMAT_VERSION.to_string() => {}
        Some((MAGIC, v)) => return Err(lines.err(format!("unsupported version `{v}`"))),
        _ => return Err(lines.err("missing phaselab-problem header")),
    }
    let n_text = lines.keyed("n")?;
    let n = parse_count(&lines, n_text)?;
    let p_text = lines.keyed("p")?;
    let p = parse_count(&lines, p_text)?;
    if n == 0 || p == 0 || n.checked_mul(p).is_none_or(|c| c > MAX_CELLS) {
        return Err(lines.err(format!("unsupported dimensions {n} x {p}")));
    }
    let seed_text = lines.keyed("seed")?;
    let seed: u64 = seed_text
        .trim()
        .parse()
        .map_err(|_| lines.err(format!("bad seed `{seed_text}`")))?;
    let config: ProblemConfig =
        serde_json::from_str(lines.keyed("config")?).map_err(|e| lines.err(e.to_string()))?;
    if config.n != n || config.p != p || config.seed != seed {
        return Err(lines.err("config disagrees with the n/p/seed header"));
    }
    let pattern_line = lines.keyed("pattern")?;
    let mut entries = Vec::with_capacity(p);
    for tok in pattern_line.split_ascii_whitespace() {
        if entries.len() == p {
            return Err(lines.err("pattern longer than p"));
        }
        let e: i8 = tok
            .parse()
            .map_err(|_| lines.err(format!("bad pattern entry `{tok}`")))?;
        entries.push(e);
    }
    if entries.len() != p {
        return Err(lines.err("pattern shorter than p"));
    }
    let pattern = SignPattern::new(entries).map_err(|e| lines.err(e.to_string()))?;

    lines.marker("X")?;
    let mut data = Vec::new();
    for _ in 0..n {
        data.extend(lines.numbers(p)?);
    }
    let x = DMatrix::from_row_slice(n, p, &data);
    lines.marker("y")?;
    let y = DVector::from_vec(lines.numbers(n)?);
    lines.marker("b_star")?;
    let b_star = DVector::from_vec(lines.numbers(p)?);
    lines.marker("noise")?;
    let noise = DVector::from_vec(lines.numbers(n)?);
    lines.marker("end")?;
    for (b, s) in b_star.iter().zip(pattern.entries()) {
        if *b != 0.0 && (b.signum() as i8) != *s {
            return Err(lines.err("b_star disagrees with the sign pattern"));
        }
    }
    Ok(ProblemRecord {
        config,
        pattern,
        x,
        y,
        b_star,
        noise,
    })
}

pub fn save_problem(problem: &RegressionProblem, path: &Path) -> Result<()> {
    let text = write_problem_text(&ProblemRecord::from_problem(problem))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_problem(path: &Path) -> Result<RegressionProblem> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_problem_text(&text)?.into_problem()
}
