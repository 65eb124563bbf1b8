//! Exact ℓ1 path (LARS with the Lasso modification) for
//!
//! ```text
//! ½bᵀQb − qᵀb + P‖b‖₁,   Q = XᵀX + wΣ,   q = Xᵀy + wΣ b_ref
//! ```
//!
//! followed from `P = ‖q‖_∞` (where `b = 0`) down to the requested level.
//! Coordinate descent struggles when the penalty is small relative to the
//! signal and the active set approaches `n` columns; the path has no such
//! problem, since every step is an exact linear solve on the active set.

use nalgebra::{DMatrix, DVector};

pub(crate) struct Quadratic<'a> {
    pub x: &'a DMatrix<f64>,
    pub y: &'a DVector<f64>,
    /// `(w, Σ, b_ref)`; `Σ = None` means identity
    pub ridge: Option<(f64, Option<&'a DMatrix<f64>>, &'a DVector<f64>)>,
}

impl Quadratic<'_> {
    fn q_entry(&self, i: usize, j: usize) -> f64 {
        let mut v = self.x.column(i).dot(&self.x.column(j));
        if let Some((w, sigma, _)) = self.ridge {
            v += w * match sigma {
                Some(s) => s[(i, j)],
                None => f64::from(u8::from(i == j)),
            };
        }
        v
    }

    /// `Q_{:,A} d`
    fn apply_cols(&self, active: &[usize], d: &[f64]) -> DVector<f64> {
        let mut xd = DVector::zeros(self.x.nrows());
        for (&j, &dj) in active.iter().zip(d) {
            xd.axpy(dj, &self.x.column(j), 1.0);
        }
        let mut out = self.x.tr_mul(&xd);
        if let Some((w, sigma, _)) = self.ridge {
            for (&j, &dj) in active.iter().zip(d) {
                match sigma {
                    Some(s) => out.axpy(w * dj, &s.column(j), 1.0),
                    None => out[j] += w * dj,
                }
            }
        }
        out
    }

    /// `q − Qb`
    fn correlations(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut c = self.x.tr_mul(&(self.y - self.x * b));
        if let Some((w, sigma, b_ref)) = self.ridge {
            let diff = b - b_ref;
            let sd = match sigma {
                Some(s) => s * diff,
                None => diff,
            };
            c.axpy(-w, &sd, 1.0);
        }
        c
    }
}

/// Lower-triangular Cholesky factor of `Q_AA`, grown and shrunk one column
/// at a time.
struct Factor {
    l: Vec<Vec<f64>>,
}

impl Factor {
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = self.l.len();
        let mut z = rhs.to_vec();
        for i in 0..m {
            let mut s = z[i];
            for k in 0..i {
                s -= self.l[i][k] * z[k];
            }
            z[i] = s / self.l[i][i];
        }
        for i in (0..m).rev() {
            let mut s = z[i];
            for k in i + 1..m {
                s -= self.l[k][i] * z[k];
            }
            z[i] = s / self.l[i][i];
        }
        z
    }

    /// Appends a column with off-diagonal entries `cross` and diagonal `diag`.
    fn push(&mut self, cross: &[f64], diag: f64) -> bool {
        let m = self.l.len();
        let mut row = vec![0.0; m + 1];
        for i in 0..m {
            let mut s = cross[i];
            for k in 0..i {
                s -= self.l[i][k] * row[k];
            }
            row[i] = s / self.l[i][i];
        }
        let rest = diag - row[..m].iter().map(|v| v * v).sum::<f64>();
        if !(rest > 1e-12 * diag.max(f64::MIN_POSITIVE)) {
            return false;
        }
        row[m] = rest.sqrt();
        self.l.push(row);
        true
    }

    /// Deletes row/column `idx`, restoring triangularity with Givens rotations.
    fn remove(&mut self, idx: usize) {
        // without row idx, each later row i reaches column i + 1
        self.l.remove(idx);
        let m = self.l.len();
        for i in idx..m {
            let (a, b) = (self.l[i][i], self.l[i][i + 1]);
            let r = a.hypot(b);
            let (c, s) = (a / r, b / r);
            for row in self.l.iter_mut().skip(i) {
                let (u, v) = (row[i], row[i + 1]);
                row[i] = c * u + s * v;
                row[i + 1] = -s * u + c * v;
            }
            self.l[i].truncate(i + 1);
        }
    }
}

/// Follows the path down to penalty `target`. Returns `None` if the active
/// Gram matrix becomes numerically singular or the step budget runs out.
pub(crate) fn solve_path(problem: &Quadratic<'_>, target: f64, max_steps: usize) -> Option<DVector<f64>> {
    let p = problem.x.ncols();
    let mut b = DVector::zeros(p);
    let mut c = problem.correlations(&b);
    let mut level = crate::linalg::inf_norm(&c);
    if level <= target {
        return Some(b);
    }
    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    let mut in_active = vec![false; p];
    let mut factor = Factor { l: Vec::new() };
    let mut entering = Some(c.iamax());
    let mut leaving_block: Option<usize> = None;

    for step in 0..max_steps {
        if let Some(j) = entering.take() {
            let cross: Vec<f64> = active.iter().map(|&i| problem.q_entry(i, j)).collect();
            if !factor.push(&cross, problem.q_entry(j, j)) {
                return None;
            }
            active.push(j);
            signs.push(c[j].signum());
            in_active[j] = true;
        }
        let d = factor.solve(&signs);
        let a = problem.apply_cols(&active, &d);

        let mut gamma = level - target;
        let mut event: Option<(bool, usize)> = None;
        for j in 0..p {
            if in_active[j] || Some(j) == leaving_block {
                continue;
            }
            for (num, den) in [(level - c[j], 1.0 - a[j]), (level + c[j], 1.0 + a[j])] {
                if den > 1e-14 {
                    let g = num / den;
                    if g > 1e-15 * level && g < gamma {
                        gamma = g;
                        event = Some((true, j));
                    }
                }
            }
        }
        for (pos, &j) in active.iter().enumerate() {
            if d[pos] != 0.0 {
                let g = -b[j] / d[pos];
                if g > 1e-15 * level && g < gamma {
                    gamma = g;
                    event = Some((false, pos));
                }
            }
        }
        for (&j, &dj) in active.iter().zip(&d) {
            b[j] += gamma * dj;
        }
        level -= gamma;
        leaving_block = None;
        match event {
            None => {
                return Some(b);
            }
            Some((true, j)) => {
                c.axpy(-gamma, &a, 1.0);
                entering = Some(j);
            }
            Some((false, pos)) => {
                let j = active[pos];
                b[j] = 0.0;
                c.axpy(-gamma, &a, 1.0);
                factor.remove(pos);
                active.remove(pos);
                signs.remove(pos);
                in_active[j] = false;
                // a coordinate that just left may not re-enter on the next step
                leaving_block = Some(j);
            }
        }
        if step % 64 == 63 {
            c = problem.correlations(&b);
        }
    }
    None
}
