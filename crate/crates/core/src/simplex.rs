//! Dense two-phase primal simplex. Entering columns are priced by the most
//! negative reduced cost; after a run of degenerate pivots the solver falls
//! back to Bland's rule until the objective moves again, which rules out
//! cycling.
//!
//! Solves `min c.x  s.t.  A x = b, x >= 0`. The tableau keeps one artificial
//! column per row for the whole run, so `B^-1` can be read off at the end
//! and duals come for free.

use crate::error::{Error, Result};

/// Degenerate pivots in a row before pricing switches to Bland's rule.
const BLAND_AFTER: usize = 32;

/// Equality-form LP with sparse columns.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub rhs: Vec<f64>,
    pub cost: Vec<f64>,
    /// `columns[j]` lists `(row, coefficient)` pairs.
    pub columns: Vec<Vec<(usize, f64)>>,
}

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    pub pivot_tol: f64,
    pub optimality_tol: f64,
    pub max_iterations: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            pivot_tol: 1e-10,
            optimality_tol: 1e-10,
            max_iterations: 200_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers `c_B B^-1`.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn add_column(&mut self, cost: f64, entries: Vec<(usize, f64)>) -> usize {
        self.cost.push(cost);
        self.columns.push(entries);
        self.columns.len() - 1
    }

    /// Reduced cost of column `j` under the given row multipliers.
    pub fn reduced_cost(&self, j: usize, duals: &[f64]) -> f64 {
        self.cost[j] - self.columns[j].iter().map(|&(r, a)| duals[r] * a).sum::<f64>()
    }

    pub fn solve(&self, opts: &SimplexOptions) -> Result<LpSolution> {
        Tableau::new(self).run(self, opts)
    }
}

struct Tableau {
    rows: usize,
    n: usize,
    width: usize,
    /// Row-major `rows x (n + rows + 1)`; the last column is the rhs.
    t: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
}

impl Tableau {
    fn new(lp: &LinearProgram) -> Self {
        let rows = lp.rhs.len();
        let n = lp.columns.len();
        let width = n + rows + 1;
        let mut t = vec![0.0; rows * width];
        let sign: Vec<f64> = lp.rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
        for (j, col) in lp.columns.iter().enumerate() {
            for &(r, a) in col {
                t[r * width + j] += sign[r] * a;
            }
        }
        for r in 0..rows {
            t[r * width + n + r] = sign[r];
            t[r * width + width - 1] = sign[r] * lp.rhs[r];
        }
        Tableau {
            rows,
            n,
            width,
            t,
            basis: (n..n + rows).collect(),
            iterations: 0,
        }
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.width + c]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let p = self.t[pr * w + pc];
        for c in 0..w {
            self.t[pr * w + c] /= p;
        }
        self.t[pr * w + pc] = 1.0;
        let pivot_row: Vec<f64> = self.t[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.t[r * w + pc];
            if f != 0.0 {
                let row = &mut self.t[r * w..(r + 1) * w];
                for (x, &y) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * y;
                }
                row[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
        self.iterations += 1;
    }

    /// Reduced costs over the first `limit` columns for basic costs `cb`.
    fn reduced_costs(&self, cost: &dyn Fn(usize) -> f64, limit: usize) -> Vec<f64> {
        let cb: Vec<f64> = self.basis.iter().map(|&b| cost(b)).collect();
        (0..limit)
            .map(|j| {
                let z: f64 = (0..self.rows).map(|r| cb[r] * self.at(r, j)).sum();
                cost(j) - z
            })
            .collect()
    }

    /// Primal simplex iterations. Columns at or beyond `enter_limit` never
    /// enter the basis.
    fn optimize(&mut self, cost: &dyn Fn(usize) -> f64, enter_limit: usize, opts: &SimplexOptions) -> Result<()> {
        let w = self.width;
        let mut reduced = self.reduced_costs(cost, enter_limit);
        let mut degenerate_run = 0usize;
        let price = |reduced: &[f64], bland: bool| {
            let mut best: Option<usize> = None;
            for (j, &rc) in reduced.iter().enumerate() {
                if rc < -opts.optimality_tol {
                    if bland {
                        return Some(j);
                    }
                    if best.map_or(true, |b| rc < reduced[b]) {
                        best = Some(j);
                    }
                }
            }
            best
        };
        loop {
            if self.iterations >= opts.max_iterations {
                return Err(Error::IterationLimit(opts.max_iterations));
            }
            let bland = degenerate_run >= BLAND_AFTER;
            let mut candidate = price(&reduced, bland);
            if candidate.is_none() || self.iterations % 64 == 63 {
                // refresh to shed accumulated round-off before trusting optimality
                reduced = self.reduced_costs(cost, enter_limit);
                candidate = price(&reduced, bland);
            }
            let Some(enter) = candidate else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, enter);
                if a > opts.pivot_tol {
                    let ratio = self.at(r, w - 1) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12
                                || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((pr, step)) = leave else {
                return Err(Error::Invariant("linear program is unbounded".into()));
            };
            if step > 1e-12 {
                degenerate_run = 0;
            } else {
                degenerate_run += 1;
            }
            // update reduced costs with the pivot row before pivoting
            let p = self.at(pr, enter);
            let f = reduced[enter] / p;
            for (j, rc) in reduced.iter_mut().enumerate() {
                *rc -= f * self.at(pr, j);
            }
            reduced[enter] = 0.0;
            self.pivot(pr, enter);
            // clamp round-off below zero
            for r in 0..self.rows {
                let v = &mut self.t[r * w + w - 1];
                if *v < 0.0 && *v > -1e-12 {
                    *v = 0.0;
                }
            }
        }
    }

    fn run(mut self, lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution> {
        let n = self.n;
        let rows = self.rows;
        // phase 1: minimize the sum of artificials
        let phase1 = |j: usize| if j >= n { 1.0 } else { 0.0 };
        self.optimize(&phase1, n, opts)?;
        let infeas: f64 = (0..rows)
            .filter(|&r| self.basis[r] >= n)
            .map(|r| self.at(r, self.width - 1))
            .sum();
        let scale = 1.0 + lp.rhs.iter().map(|b| b.abs()).sum::<f64>();
        if infeas > 1e-9 * scale {
            return Err(Error::Infeasible);
        }
        // drive zero-level artificials out where possible
        for r in 0..rows {
            if self.basis[r] >= n {
                if let Some(c) = (0..n).find(|&c| self.at(r, c).abs() > 1e-9) {
                    self.pivot(r, c);
                }
            }
        }
        // phase 2
        let phase2 = |j: usize| if j >= n { 0.0 } else { lp.cost[j] };
        self.optimize(&phase2, n, opts)?;

        let mut x = vec![0.0; n];
        for r in 0..rows {
            let b = self.basis[r];
            if b < n {
                x[b] = self.at(r, self.width - 1).max(0.0);
            }
        }
        let objective = x.iter().zip(&lp.cost).map(|(a, c)| a * c).sum();
        let sign: Vec<f64> = lp.rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
        let cb: Vec<f64> = self.basis.iter().map(|&b| phase2(b)).collect();
        let duals = (0..rows)
            .map(|s| {
                let binv: f64 = (0..rows).map(|r| cb[r] * self.at(r, n + s)).sum();
                binv * sign[s]
            })
            .collect();
        Ok(LpSolution {
            x,
            objective,
            duals,
            iterations: self.iterations,
        })
    }
}
