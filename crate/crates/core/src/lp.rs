//! Dense tableau simplex for small linear programs in standard form
//!
//! ```text
//! minimize  c^T x   subject to  A x = b,  x >= 0
//! ```
//!
//! Pricing is Dantzig's most-negative reduced cost; after a run of
//! degenerate pivots the solver switches to Bland's lowest-index rule for the
//! rest of the solve, which rules out cycling. A caller that already knows a
//! feasible basis can skip phase one with [`LinearProgram::solve_from_basis`].

use crate::error::{check_dim, Error, Result};

const EPS: f64 = 1e-9;
const PIVOT_EPS: f64 = 1e-11;
const DEGENERATE_STREAK: usize = 50;

#[derive(Clone, Debug)]
pub struct LinearProgram {
    cost: Vec<f64>,
    /// Row-major constraint matrix, `rows x cols`.
    matrix: Vec<f64>,
    rhs: Vec<f64>,
    rows: usize,
    cols: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
    pub basis: Vec<usize>,
}

struct Tableau {
    /// `rows x (cols + 1)`; last column is the right-hand side.
    t: Vec<f64>,
    rows: usize,
    cols: usize,
    basis: Vec<usize>,
    pivots: usize,
    bland: bool,
    degenerate_run: usize,
}

enum Step {
    Optimal,
    Pivoted,
    Unbounded,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.width() + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width();
        let inv = 1.0 / self.t[pr * w + pc];
        for v in &mut self.t[pr * w..(pr + 1) * w] {
            *v *= inv;
        }
        self.t[pr * w + pc] = 1.0;
        let pivot_row: Vec<f64> = self.t[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let factor = self.t[r * w + pc];
            if factor == 0.0 {
                continue;
            }
            let row = &mut self.t[r * w..(r + 1) * w];
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v -= factor * p;
            }
            row[pc] = 0.0;
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    /// Reduced costs `c_j - c_B^T B^{-1} A_j` for the current basis.
    fn reduced_costs(&self, cost: &[f64], allowed: usize) -> Vec<f64> {
        let mut red = cost[..allowed].to_vec();
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            let base = r * self.width();
            for (j, v) in red.iter_mut().enumerate() {
                *v -= cb * self.t[base + j];
            }
        }
        red
    }

    /// One pricing + ratio-test step over columns `0..allowed`.
    fn step(&mut self, cost: &[f64], allowed: usize) -> Step {
        let red = self.reduced_costs(cost, allowed);
        let entering = if self.bland {
            red.iter().position(|&d| d < -EPS)
        } else {
            red.iter()
                .enumerate()
                .filter(|(_, &d)| d < -EPS)
                .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
                .map(|(j, _)| j)
        };
        let Some(pc) = entering else {
            return Step::Optimal;
        };

        let mut leave: Option<(usize, f64)> = None;
        for r in 0..self.rows {
            let a = self.at(r, pc);
            if a > PIVOT_EPS {
                let ratio = self.rhs(r).max(0.0) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - EPS
                            || (ratio <= lratio + EPS && self.basis[r] < self.basis[lr])
                        {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
        }
        let Some((pr, ratio)) = leave else {
            return Step::Unbounded;
        };
        if ratio <= EPS {
            self.degenerate_run += 1;
            if self.degenerate_run >= DEGENERATE_STREAK {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
        }
        self.pivot(pr, pc);
        Step::Pivoted
    }

    fn run(&mut self, cost: &[f64], allowed: usize, max_pivots: usize) -> Result<()> {
        loop {
            if self.pivots >= max_pivots {
                return Err(Error::LpIterationLimit {
                    iterations: self.pivots,
                    objective: self.objective(cost),
                    solution: self.solution(),
                });
            }
            match self.step(cost, allowed) {
                Step::Optimal => return Ok(()),
                Step::Pivoted => {}
                Step::Unbounded => return Err(Error::Unbounded),
            }
        }
    }

    fn solution(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.cols];
        for (r, &j) in self.basis.iter().enumerate() {
            x[j] = self.rhs(r).max(0.0);
        }
        x
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(r, &j)| cost[j] * self.rhs(r).max(0.0))
            .sum()
    }
}

impl LinearProgram {
    /// `matrix` is row-major with `rhs.len()` rows and `cost.len()` columns.
    pub fn new(cost: Vec<f64>, matrix: Vec<f64>, rhs: Vec<f64>) -> Result<Self> {
        let rows = rhs.len();
        let cols = cost.len();
        check_dim(rows * cols, matrix.len())?;
        if rows == 0 || cols == 0 {
            return Err(Error::contract("LP needs at least one row and one column"));
        }
        if cost
            .iter()
            .chain(&matrix)
            .chain(&rhs)
            .any(|v| !v.is_finite())
        {
            return Err(Error::contract("LP data must be finite"));
        }
        Ok(LinearProgram {
            cost,
            matrix,
            rhs,
            rows,
            cols,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn default_pivot_cap(&self) -> usize {
        50 * (self.rows + self.cols)
    }

    fn tableau(&self, extra_cols: usize) -> Tableau {
        let cols = self.cols + extra_cols;
        let w = cols + 1;
        let mut t = vec![0.0; self.rows * w];
        for r in 0..self.rows {
            t[r * w..r * w + self.cols]
                .copy_from_slice(&self.matrix[r * self.cols..(r + 1) * self.cols]);
            t[r * w + cols] = self.rhs[r];
        }
        Tableau {
            t,
            rows: self.rows,
            cols,
            basis: vec![usize::MAX; self.rows],
            pivots: 0,
            bland: false,
            degenerate_run: 0,
        }
    }

    fn finish(&self, tab: Tableau) -> LpSolution {
        let mut x = tab.solution();
        x.truncate(self.cols);
        let objective = self.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
        LpSolution {
            x,
            objective,
            pivots: tab.pivots,
            basis: tab.basis,
        }
    }

    /// Two-phase simplex from scratch.
    pub fn solve(&self, max_pivots: usize) -> Result<LpSolution> {
        let mut tab = self.tableau(self.rows);
        let w = tab.width();
        for r in 0..self.rows {
            if tab.t[r * w + tab.cols] < 0.0 {
                for v in &mut tab.t[r * w..(r + 1) * w] {
                    *v = -*v;
                }
            }
            tab.t[r * w + self.cols + r] = 1.0;
            tab.basis[r] = self.cols + r;
        }

        let mut phase1 = vec![0.0; self.cols + self.rows];
        for v in &mut phase1[self.cols..] {
            *v = 1.0;
        }
        tab.run(&phase1, self.cols + self.rows, max_pivots)?;
        let infeasibility = tab.objective(&phase1);
        let scale = 1.0 + self.rhs.iter().map(|v| v.abs()).sum::<f64>();
        if infeasibility > 1e-7 * scale {
            return Err(Error::contract(format!(
                "LP is infeasible (phase-one residual {infeasibility:.3e})"
            )));
        }

        // Drive remaining artificials out of the basis; rows where that is
        // impossible are redundant and keep a zero-valued artificial.
        for r in 0..self.rows {
            if tab.basis[r] >= self.cols {
                if let Some(c) = (0..self.cols).find(|&c| tab.at(r, c).abs() > 1e-9) {
                    tab.pivot(r, c);
                }
            }
        }

        let mut cost = self.cost.clone();
        cost.extend(std::iter::repeat_n(0.0, self.rows));
        tab.bland = false;
        tab.degenerate_run = 0;
        tab.run(&cost, self.cols, max_pivots)?;
        Ok(self.finish(tab))
    }

    /// Phase two from a caller-supplied basis, which must be nonsingular and
    /// primal feasible.
    pub fn solve_from_basis(&self, basis: &[usize], max_pivots: usize) -> Result<LpSolution> {
        check_dim(self.rows, basis.len())?;
        let mut tab = self.tableau(0);
        let mut assigned = vec![false; self.rows];
        for &col in basis {
            if col >= self.cols {
                return Err(Error::contract("basis column out of range"));
            }
            let row = (0..self.rows)
                .filter(|&r| !assigned[r])
                .max_by(|&a, &b| tab.at(a, col).abs().total_cmp(&tab.at(b, col).abs()))
                .filter(|&r| tab.at(r, col).abs() > PIVOT_EPS)
                .ok_or_else(|| Error::contract("initial basis is singular"))?;
            assigned[row] = true;
            tab.pivot(row, col);
        }
        tab.pivots = 0;
        if (0..self.rows).any(|r| tab.rhs(r) < -1e-9) {
            return Err(Error::contract("initial basis is not primal feasible"));
        }
        tab.run(&self.cost, self.cols, max_pivots)?;
        Ok(self.finish(tab))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y  s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  => (2, 6), 36
        let lp = LinearProgram::new(
            vec![-3.0, -5.0, 0.0, 0.0, 0.0],
            vec![
                1.0, 0.0, 1.0, 0.0, 0.0, //
                0.0, 2.0, 0.0, 1.0, 0.0, //
                3.0, 2.0, 0.0, 0.0, 1.0,
            ],
            vec![4.0, 12.0, 18.0],
        )
        .unwrap();
        let s = lp.solve(1000).unwrap();
        assert!((s.objective + 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9);
        assert!((s.x[1] - 6.0).abs() < 1e-9);

        let warm = lp.solve_from_basis(&[2, 3, 4], 1000).unwrap();
        assert!((warm.objective + 36.0).abs() < 1e-9);
    }

    #[test]
    fn equality_with_redundant_row() {
        // x + y = 1, 2x + 2y = 2, min x + 2y => x = 1
        let lp =
            LinearProgram::new(vec![1.0, 2.0], vec![1.0, 1.0, 2.0, 2.0], vec![1.0, 2.0]).unwrap();
        let s = lp.solve(100).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        // x + y = -1 with x, y >= 0
        let lp = LinearProgram::new(vec![1.0, 1.0], vec![1.0, 1.0], vec![-1.0]).unwrap();
        assert!(matches!(lp.solve(100), Err(Error::Contract(_))));
        // min -x s.t. x - y = 0
        let lp = LinearProgram::new(vec![-1.0, 0.0], vec![1.0, -1.0], vec![0.0]).unwrap();
        assert!(matches!(lp.solve(100), Err(Error::Unbounded)));
    }

    #[test]
    fn pivot_cap_reports_best_so_far() {
        let lp = LinearProgram::new(
            vec![-3.0, -5.0, 0.0, 0.0, 0.0],
            vec![
                1.0, 0.0, 1.0, 0.0, 0.0, //
                0.0, 2.0, 0.0, 1.0, 0.0, //
                3.0, 2.0, 0.0, 0.0, 1.0,
            ],
            vec![4.0, 12.0, 18.0],
        )
        .unwrap();
        match lp.solve_from_basis(&[2, 3, 4], 1) {
            Err(Error::LpIterationLimit { solution, .. }) => assert_eq!(solution.len(), 5),
            other => panic!("expected iteration limit, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's cycling example (cycles under Dantzig with naive tie-breaking).
        let cost = vec![-0.75, 150.0, -0.02, 6.0, 0.0, 0.0, 0.0];
        let matrix = vec![
            0.25, -60.0, -0.04, 9.0, 1.0, 0.0, 0.0, //
            0.5, -90.0, -0.02, 3.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0,
        ];
        let lp = LinearProgram::new(cost, matrix, vec![0.0, 0.0, 1.0]).unwrap();
        let s = lp.solve_from_basis(&[4, 5, 6], 10_000).unwrap();
        assert!((s.objective + 0.05).abs() < 1e-9);
    }
}
