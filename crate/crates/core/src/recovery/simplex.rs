//! Dense two-phase tableau simplex for `min c^T x  s.t.  A x = b, x >= 0`.
//!
//! Sized for the small, wide systems of basis pursuit (a handful of
//! measurement rows, a few hundred columns). Dantzig pricing, switching to
//! Bland's rule after a run of degenerate pivots so the method cannot cycle.

use nalgebra::{DMatrix, DVector};

const DEGENERATE_RUN_BEFORE_BLAND: usize = 50;

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
    pub pivots: usize,
}

#[derive(Debug, Clone)]
pub(crate) enum LpFailure {
    Infeasible { residual: f64, pivots: usize },
    Unbounded { pivots: usize },
    IterationLimit { residual: f64, pivots: usize },
}

struct Tableau {
    rows: usize,
    /// Structural plus artificial columns; the right-hand side sits after them.
    cols: usize,
    structural: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    pivot_tol: f64,
    cost_tol: f64,
    pivots: usize,
    degenerate_run: usize,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width() + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    /// Objective row is row `rows`.
    fn cost(&self, c: usize) -> f64 {
        self.at(self.rows, c)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width();
        let inv = 1.0 / self.at(pr, pc);
        for c in 0..w {
            self.data[pr * w + c] *= inv;
        }
        self.data[pr * w + pc] = 1.0;
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let factor = self.data[r * w + pc];
            if factor == 0.0 {
                continue;
            }
            for c in 0..w {
                self.data[r * w + c] -= factor * self.data[pr * w + c];
            }
            self.data[r * w + pc] = 0.0;
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    fn choose_entering(&self, allowed: usize) -> Option<usize> {
        if self.degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND {
            return (0..allowed).find(|&c| self.cost(c) < -self.cost_tol);
        }
        let mut best = None;
        let mut best_cost = -self.cost_tol;
        for c in 0..allowed {
            let v = self.cost(c);
            if v < best_cost {
                best_cost = v;
                best = Some(c);
            }
        }
        best
    }

    fn choose_leaving(&self, pc: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.rows {
            let a = self.at(r, pc);
            if a <= self.pivot_tol {
                continue;
            }
            let ratio = self.rhs(r).max(0.0) / a;
            match best {
                Some((br, bv)) if ratio > bv || (ratio == bv && self.basis[r] > self.basis[br]) => {}
                _ => best = Some((r, ratio)),
            }
        }
        best.map(|(r, _)| r)
    }

    /// Runs pivots over columns `0..allowed` until optimal.
    fn optimize(&mut self, allowed: usize, max_pivots: usize) -> Result<(), LpFailure> {
        while let Some(pc) = self.choose_entering(allowed) {
            if self.pivots >= max_pivots {
                return Err(LpFailure::IterationLimit { residual: f64::NAN, pivots: self.pivots });
            }
            let Some(pr) = self.choose_leaving(pc) else {
                return Err(LpFailure::Unbounded { pivots: self.pivots });
            };
            if self.rhs(pr).abs() <= self.pivot_tol {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }
            self.pivot(pr, pc);
        }
        Ok(())
    }

    fn set_costs(&mut self, costs: &[f64]) {
        let w = self.width();
        let obj = self.rows * w;
        for c in 0..w {
            self.data[obj + c] = if c < costs.len() { costs[c] } else { 0.0 };
        }
        for r in 0..self.rows {
            let cb = costs.get(self.basis[r]).copied().unwrap_or(0.0);
            if cb == 0.0 {
                continue;
            }
            for c in 0..w {
                self.data[obj + c] -= cb * self.data[r * w + c];
            }
        }
    }
}

/// Solves the standard-form LP. `a` is `m x n`.
pub(crate) fn solve_standard_form(
    a: &DMatrix<f64>,
    b: &[f64],
    c: &[f64],
    max_pivots: usize,
) -> Result<LpSolution, LpFailure> {
    let (m, n) = a.shape();
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);
    let cols = n + m;
    let width = cols + 1;
    let mut data = vec![0.0; (m + 1) * width];
    for r in 0..m {
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            data[r * width + j] = sign * a[(r, j)];
        }
        data[r * width + n + r] = 1.0;
        data[r * width + cols] = sign * b[r];
    }
    let mut t = Tableau {
        rows: m,
        cols,
        structural: n,
        data,
        basis: (n..n + m).collect(),
        pivot_tol: 1e-9 * scale,
        cost_tol: 1e-10 * scale,
        pivots: 0,
        degenerate_run: 0,
    };

    let mut phase_one = vec![0.0; cols];
    phase_one[n..].iter_mut().for_each(|v| *v = 1.0);
    t.set_costs(&phase_one);
    t.optimize(cols, max_pivots)?;
    let b_scale = b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let infeasibility = -t.rhs(t.rows);
    if infeasibility > 1e-9 * b_scale {
        return Err(LpFailure::Infeasible { residual: infeasibility, pivots: t.pivots });
    }

    // Drive zero-level artificials out of the basis where possible; rows where
    // no structural pivot exists are redundant and keep their artificial.
    for r in 0..m {
        if t.basis[r] < n {
            continue;
        }
        let candidate = (0..n)
            .filter(|&j| t.at(r, j).abs() > t.pivot_tol)
            .max_by(|&x, &y| t.at(r, x).abs().total_cmp(&t.at(r, y).abs()));
        if let Some(j) = candidate {
            t.pivot(r, j);
        }
    }

    t.degenerate_run = 0;
    t.set_costs(c);
    t.optimize(t.structural, max_pivots)?;

    let mut x = vec![0.0; n];
    for r in 0..m {
        if t.basis[r] < n {
            x[t.basis[r]] = t.rhs(r).max(0.0);
        }
    }
    refine_basic_solution(a, b, &t.basis[..], n, &mut x);
    Ok(LpSolution { x, pivots: t.pivots })
}

/// Re-solves the basic variables against the original data, keeping the
/// result only when it lowers the residual without going negative.
fn refine_basic_solution(a: &DMatrix<f64>, b: &[f64], basis: &[usize], n: usize, x: &mut [f64]) {
    let cols: Vec<usize> = basis.iter().copied().filter(|&j| j < n).collect();
    if cols.is_empty() {
        return;
    }
    let residual = |x: &[f64]| -> f64 {
        let xv = DVector::from_column_slice(x);
        (a * xv - DVector::from_column_slice(b)).norm()
    };
    let before = residual(x);
    let sub = a.select_columns(&cols);
    let rhs = DVector::from_column_slice(b);
    let Ok(sol) = sub.svd(true, true).solve(&rhs, 1e-13) else {
        return;
    };
    if sol.iter().any(|&v| v < -1e-9) {
        return;
    }
    let mut candidate = x.to_vec();
    for (k, &j) in cols.iter().enumerate() {
        candidate[j] = sol[k].max(0.0);
    }
    if residual(&candidate) < before {
        x.copy_from_slice(&candidate);
    }
}
