//! Dense two-phase simplex for the small standard-form LPs used here.
//!
//! Problems have the form `A x = b, x >= 0` with at most a few dozen rows and
//! up to tens of thousands of columns. Phase 1 minimizes the sum of
//! artificial variables; its optimal dual vector is a Farkas certificate when
//! the system is infeasible. Pricing is Dantzig's rule, falling back to
//! Bland's rule while pivots are degenerate so the method cannot cycle.
//!
//! After each phase the basic solution (or dual) is recomputed from the
//! original data by Gaussian elimination, so tableau round-off does not leak
//! into reported values.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const PRICE_EPS: f64 = 1e-11;
const DEGENERATE_STREAK: usize = 32;

/// Result of a phase-1 feasibility solve.
#[derive(Debug, Clone)]
pub enum Feasibility {
    /// `x >= 0` with `A x` within `infeasibility` (sum of artificials) of `b`.
    Feasible { x: Vec<f64>, infeasibility: f64 },
    /// `y` with `y . A_j <= 0` for all columns and `y . b = infeasibility > tol`.
    Infeasible { farkas: Vec<f64>, infeasibility: f64 },
}

#[derive(Debug, Clone)]
pub enum Optimum {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible { farkas: Vec<f64>, infeasibility: f64 },
    Unbounded,
}

/// Standard-form problem stored by columns.
#[derive(Debug, Clone)]
pub struct StandardForm<'a> {
    columns: &'a [Vec<f64>],
    rhs: &'a [f64],
}

impl<'a> StandardForm<'a> {
    pub fn new(columns: &'a [Vec<f64>], rhs: &'a [f64]) -> Result<Self> {
        if let Some((j, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != rhs.len()) {
            return Err(Error::DimensionMismatch(format!("LP column {j} has {} rows, rhs has {}", c.len(), rhs.len())));
        }
        if columns.iter().flatten().chain(rhs).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("LP data contains non-finite values".into()));
        }
        Ok(Self { columns, rhs })
    }

    pub fn rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    /// Phase 1 only. `tol` bounds the accepted sum of artificials.
    pub fn feasibility(&self, tol: f64) -> Result<Feasibility> {
        let mut t = Tableau::new(self);
        t.phase_one()?;
        let infeasibility = t.objective_value();
        if infeasibility > tol {
            let farkas = t.phase_one_duals(self)?;
            let infeasibility = dot(&farkas, self.rhs);
            return Ok(Feasibility::Infeasible { farkas, infeasibility });
        }
        t.drive_out_artificials();
        let x = t.refined_primal(self)?;
        let infeasibility = self.residual_l1(&x);
        Ok(Feasibility::Feasible { x, infeasibility })
    }

    /// Minimizes `cost . x`. The phase-1 acceptance threshold is `tol`.
    pub fn minimize(&self, cost: &[f64], tol: f64) -> Result<Optimum> {
        if cost.len() != self.cols() {
            return Err(Error::DimensionMismatch(format!(
                "cost has {} entries for {} columns",
                cost.len(),
                self.cols()
            )));
        }
        let mut t = Tableau::new(self);
        t.phase_one()?;
        let infeasibility = t.objective_value();
        if infeasibility > tol {
            let farkas = t.phase_one_duals(self)?;
            let infeasibility = dot(&farkas, self.rhs);
            return Ok(Optimum::Infeasible { farkas, infeasibility });
        }
        t.drive_out_artificials();
        if !t.phase_two(cost)? {
            return Ok(Optimum::Unbounded);
        }
        let x = t.refined_primal(self)?;
        let objective = dot(cost, &x);
        Ok(Optimum::Optimal { x, objective })
    }

    /// `sum_i |(A x - b)_i|`.
    pub fn residual_l1(&self, x: &[f64]) -> f64 {
        self.image(x).iter().zip(self.rhs).map(|(ax, b)| (ax - b).abs()).sum()
    }

    pub fn image(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        for (col, &xj) in self.columns.iter().zip(x) {
            if xj != 0.0 {
                for (o, a) in out.iter_mut().zip(col) {
                    *o += a * xj;
                }
            }
        }
        out
    }
}

struct Tableau {
    rows: usize,
    n: usize,
    /// Row width: n structural + rows artificial + rhs.
    width: usize,
    data: Vec<f64>,
    /// Reduced costs over all columns, last entry holds `-objective`.
    reduced: Vec<f64>,
    basis: Vec<usize>,
    /// Rows whose sign was flipped to make the rhs nonnegative.
    flipped: Vec<bool>,
    /// Artificial columns may not re-enter in phase 2.
    phase_two: bool,
    max_iter: usize,
}

impl Tableau {
    fn new(lp: &StandardForm<'_>) -> Self {
        let rows = lp.rows();
        let n = lp.cols();
        let width = n + rows + 1;
        let mut data = vec![0.0; rows * width];
        let mut flipped = vec![false; rows];
        for i in 0..rows {
            let sign = if lp.rhs[i] < 0.0 { -1.0 } else { 1.0 };
            flipped[i] = sign < 0.0;
            let row = &mut data[i * width..(i + 1) * width];
            for (j, col) in lp.columns.iter().enumerate() {
                row[j] = sign * col[i];
            }
            row[n + i] = 1.0;
            row[width - 1] = sign * lp.rhs[i];
        }
        // Phase-1 costs: 1 on artificials, basis is the artificials.
        let mut reduced = vec![0.0; width];
        for i in 0..rows {
            let row = &data[i * width..(i + 1) * width];
            for j in 0..n {
                reduced[j] -= row[j];
            }
            reduced[width - 1] -= row[width - 1];
        }
        Self {
            rows,
            n,
            width,
            data,
            reduced,
            basis: (n..n + rows).collect(),
            flipped,
            phase_two: false,
            max_iter: 50_000 + 20 * (n + rows),
        }
    }

    fn objective_value(&self) -> f64 {
        -self.reduced[self.width - 1]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.data[i * self.width + self.width - 1]
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let limit = if self.phase_two { self.n } else { self.n + self.rows };
        if bland {
            (0..limit).find(|&j| self.reduced[j] < -PRICE_EPS)
        } else {
            let mut best = None;
            let mut best_val = -PRICE_EPS;
            for j in 0..limit {
                if self.reduced[j] < best_val {
                    best_val = self.reduced[j];
                    best = Some(j);
                }
            }
            best
        }
    }

    /// Minimum-ratio row, ties to the smallest basic index.
    fn leaving(&self, col: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let a = self.at(i, col);
            if a > PIVOT_EPS {
                let ratio = self.rhs(i).max(0.0) / a;
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-14 || (ratio <= br + 1e-14 && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
        }
        best.map(|(i, _)| i)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let piv = self.data[r * w + c];
        {
            let row = &mut self.data[r * w..(r + 1) * w];
            for v in row.iter_mut() {
                *v /= piv;
            }
            row[c] = 1.0;
        }
        let pivot_row: Vec<f64> = self.data[r * w..(r + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let factor = self.data[i * w + c];
            if factor != 0.0 {
                let row = &mut self.data[i * w..(i + 1) * w];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
                row[c] = 0.0;
            }
        }
        let factor = self.reduced[c];
        if factor != 0.0 {
            for (v, p) in self.reduced.iter_mut().zip(&pivot_row) {
                *v -= factor * p;
            }
            self.reduced[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Runs pivots until optimal. Returns false when unbounded.
    fn iterate(&mut self) -> Result<bool> {
        let mut degenerate = 0usize;
        for _ in 0..self.max_iter {
            let bland = degenerate >= DEGENERATE_STREAK;
            let Some(col) = self.entering(bland) else {
                return Ok(true);
            };
            let Some(row) = self.leaving(col) else {
                return Ok(false);
            };
            if self.rhs(row) <= PIVOT_EPS {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(row, col);
        }
        Err(Error::Numerical(format!("simplex did not converge in {} pivots", self.max_iter)))
    }

    fn phase_one(&mut self) -> Result<()> {
        if !self.iterate()? {
            // Phase 1 is bounded below by zero.
            return Err(Error::Numerical("phase 1 reported unbounded".into()));
        }
        Ok(())
    }

    /// Pivots zero-level artificials out of the basis where a structural
    /// column can replace them. Rows where none can are redundant.
    fn drive_out_artificials(&mut self) {
        for r in 0..self.rows {
            if self.basis[r] < self.n {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n {
                let a = self.at(r, j).abs();
                if a > 1e-9 && best.is_none_or(|(_, b)| a > b) {
                    best = Some((j, a));
                }
            }
            if let Some((j, _)) = best {
                self.pivot(r, j);
            }
        }
    }

    fn phase_two(&mut self, cost: &[f64]) -> Result<bool> {
        self.phase_two = true;
        let w = self.width;
        let mut reduced = vec![0.0; w];
        reduced[..self.n].copy_from_slice(cost);
        for i in 0..self.rows {
            let cb = if self.basis[i] < self.n { cost[self.basis[i]] } else { 0.0 };
            if cb != 0.0 {
                let row = &self.data[i * w..(i + 1) * w];
                for (r, v) in reduced.iter_mut().zip(row) {
                    *r -= cb * v;
                }
            }
        }
        for i in 0..self.rows {
            reduced[self.basis[i]] = 0.0;
        }
        self.reduced = reduced;
        self.iterate()
    }

    /// Basis matrix of the (sign-adjusted) original problem, row-major.
    fn basis_matrix(&self, lp: &StandardForm<'_>) -> Vec<f64> {
        let r = self.rows;
        let mut mat = vec![0.0; r * r];
        for (k, &j) in self.basis.iter().enumerate() {
            for i in 0..r {
                let sign = if self.flipped[i] { -1.0 } else { 1.0 };
                let v = if j < self.n {
                    sign * lp.columns[j][i]
                } else if j - self.n == i {
                    1.0
                } else {
                    0.0
                };
                mat[i * r + k] = v;
            }
        }
        mat
    }

    fn refined_primal(&self, lp: &StandardForm<'_>) -> Result<Vec<f64>> {
        let r = self.rows;
        let mat = self.basis_matrix(lp);
        let rhs: Vec<f64> = (0..r).map(|i| if self.flipped[i] { -lp.rhs[i] } else { lp.rhs[i] }).collect();
        let xb = solve_dense(mat, rhs, r).unwrap_or_else(|| (0..r).map(|i| self.rhs(i)).collect());
        let mut x = vec![0.0; self.n];
        for (k, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                x[j] = xb[k].max(0.0);
            }
        }
        Ok(x)
    }

    /// Phase-1 dual vector mapped back to the original row signs.
    fn phase_one_duals(&self, lp: &StandardForm<'_>) -> Result<Vec<f64>> {
        let r = self.rows;
        let mat = self.basis_matrix(lp);
        let mut transposed = vec![0.0; r * r];
        for i in 0..r {
            for k in 0..r {
                transposed[k * r + i] = mat[i * r + k];
            }
        }
        let cb: Vec<f64> = self.basis.iter().map(|&j| if j >= self.n { 1.0 } else { 0.0 }).collect();
        let y = match solve_dense(transposed, cb, r) {
            Some(y) => y,
            // Singular refit: read duals off the artificial reduced costs.
            None => (0..r).map(|i| 1.0 - self.reduced[self.n + i]).collect(),
        };
        Ok(y.iter().zip(&self.flipped).map(|(&v, &f)| if f { -v } else { v }).collect())
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Gaussian elimination with partial pivoting on a row-major `n x n` system.
/// Returns `None` for numerically singular matrices.
pub(crate) fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let (p, max) = (col..n).map(|i| (i, a[i * n + col].abs())).max_by(|u, v| u.1.total_cmp(&v.1))?;
        if max < 1e-13 {
            return None;
        }
        if p != col {
            for k in 0..n {
                a.swap(p * n + k, col * n + k);
            }
            b.swap(p, col);
        }
        let piv = a[col * n + col];
        for i in col + 1..n {
            let f = a[i * n + col] / piv;
            if f != 0.0 {
                for k in col..n {
                    a[i * n + k] -= f * a[col * n + k];
                }
                b[i] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i * n + k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i * n + i];
    }
    Some(x)
}
