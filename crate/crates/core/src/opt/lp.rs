//! Dense two-phase simplex over `{x ≥ 0 : A x = b}` with Bland's rule.
//!
//! Instances in this crate have at most a few dozen columns, so the tableau is
//! stored densely and every pivot touches the whole matrix.

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};

const REDUCED_COST_EPS: f64 = 1e-10;
const PIVOT_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

/// `optimize cᵀx  s.t.  A x = b, x ≥ 0`, with `A` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub sense: Sense,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<f64>, sense: Sense) -> Result<Self> {
        let n = objective.len();
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} constraint rows but {} right-hand sides",
                a.len(),
                b.len()
            )));
        }
        if let Some((i, row)) = a.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} columns, objective has {n}",
                row.len()
            )));
        }
        Ok(Self {
            objective,
            a,
            b,
            sense,
        })
    }

    /// Zero objective; used for pure feasibility questions.
    pub fn feasibility(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let n = a.first().map_or(0, Vec::len);
        Self::new(vec![0.0; n], a, b, Sense::Min)
    }

    pub fn rows(&self) -> usize {
        self.b.len()
    }

    pub fn cols(&self) -> usize {
        self.objective.len()
    }

    /// Largest `|A x − b|` entry.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, bi)| (row.iter().zip(x).map(|(r, v)| r * v).sum::<f64>() - bi).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Objective value in the problem's own sense; NaN unless optimal.
    pub value: f64,
    pub solution: Vec<f64>,
    /// Optimal: row duals `y` with `bᵀy = value`. Infeasible: a Farkas vector
    /// with `Aᵀy ≤ 0` and `bᵀy > 0`. Unbounded: empty.
    pub dual: Vec<f64>,
    pub pivots: usize,
    /// Phase-1 optimum (sum of artificial variables).
    pub phase1_residual: f64,
}

impl LpResult {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

pub fn lp_solve(p: &LpProblem) -> Result<LpResult> {
    lp_solve_with(p, &Tolerances::default())
}

pub fn lp_solve_with(p: &LpProblem, tol: &Tolerances) -> Result<LpResult> {
    // Re-validate: fields are public.
    let p = LpProblem::new(p.objective.clone(), p.a.clone(), p.b.clone(), p.sense)?;
    let limit = tol.lp_pivot_factor * (p.rows() + p.cols()).max(1);
    Tableau::new(&p).solve(&p, tol.lp_feasibility, limit)
}

struct Tableau {
    n: usize,
    m: usize,
    /// Rows of `[A | I | b]` after sign normalization.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Original row index of each tableau row.
    row_of: Vec<usize>,
    row_sign: Vec<f64>,
    pivots: usize,
}

impl Tableau {
    fn new(p: &LpProblem) -> Self {
        let (m, n) = (p.rows(), p.cols());
        let mut t = Vec::with_capacity(m);
        let mut row_sign = Vec::with_capacity(m);
        for (i, (row, &bi)) in p.a.iter().zip(&p.b).enumerate() {
            let s = if bi < 0.0 { -1.0 } else { 1.0 };
            let mut r = Vec::with_capacity(n + m + 1);
            r.extend(row.iter().map(|v| s * v));
            r.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
            r.push(s * bi);
            t.push(r);
            row_sign.push(s);
        }
        Self {
            n,
            m,
            t,
            basis: (n..n + m).collect(),
            row_of: (0..m).collect(),
            row_sign,
            pivots: 0,
        }
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[i][self.n + self.m]
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let width = self.n + self.m;
        let mut r = cost.to_vec();
        for (row, &bj) in self.t.iter().zip(&self.basis) {
            let cb = cost[bj];
            if cb != 0.0 {
                for j in 0..width {
                    r[j] -= cb * row[j];
                }
            }
        }
        r
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.t[row].len();
        let piv = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= piv;
        }
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for j in 0..width {
                    r[j] -= f * pivot_row[j];
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Runs simplex iterations for `min costᵀx` over columns `< allowed`.
    /// Returns `false` when unbounded.
    fn iterate(&mut self, cost: &[f64], allowed: usize, limit: usize) -> Result<bool> {
        loop {
            let r = self.reduced_costs(cost);
            // Bland: lowest-index improving column.
            let Some(col) = (0..allowed).find(|&j| r[j] < -REDUCED_COST_EPS) else {
                return Ok(true);
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][col];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-14
                                || (ratio <= br + 1e-14 && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = best else {
                return Ok(false);
            };
            if self.pivots >= limit {
                return Err(Error::IterationLimit { limit });
            }
            self.pivot(row, col);
        }
    }

    /// Duals in original row order from the reduced costs of the artificial columns.
    fn duals(&self, reduced: &[f64], artificial_cost: f64) -> Vec<f64> {
        (0..self.m)
            .map(|k| self.row_sign[k] * (artificial_cost - reduced[self.n + k]))
            .collect()
    }

    fn solve(mut self, p: &LpProblem, feas_tol: f64, limit: usize) -> Result<LpResult> {
        let (n, m) = (self.n, self.m);

        // Phase 1: minimise the sum of artificials.
        let mut phase1 = vec![0.0; n + m + 1];
        for c in phase1.iter_mut().skip(n).take(m) {
            *c = 1.0;
        }
        self.iterate(&phase1[..n + m], n, limit)?;
        let residual: f64 = (0..self.t.len())
            .filter(|&i| self.basis[i] >= n)
            .map(|i| self.rhs(i))
            .sum();
        if residual > feas_tol {
            let r = self.reduced_costs(&phase1[..n + m]);
            return Ok(LpResult {
                status: LpStatus::Infeasible,
                value: f64::NAN,
                solution: Vec::new(),
                dual: self.duals(&r, 1.0),
                pivots: self.pivots,
                phase1_residual: residual,
            });
        }

        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < self.t.len() {
            if self.basis[i] >= n {
                let row = &self.t[i];
                let col = (0..n)
                    .filter(|&j| row[j].abs() > 1e-9)
                    .max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()));
                match col {
                    Some(j) => {
                        self.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        self.t.remove(i);
                        self.basis.remove(i);
                        self.row_of.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }

        // Phase 2 in minimisation form.
        let flip = if p.sense == Sense::Max { -1.0 } else { 1.0 };
        let mut cost = vec![0.0; n + m];
        for (c, v) in cost.iter_mut().zip(&p.objective) {
            *c = flip * v;
        }
        let bounded = self.iterate(&cost, n, limit)?;
        let mut x = vec![0.0; n];
        for (i, &bj) in self.basis.iter().enumerate() {
            if bj < n {
                x[bj] = self.rhs(i).max(0.0);
            }
        }
        if !bounded {
            return Ok(LpResult {
                status: LpStatus::Unbounded,
                value: f64::NAN,
                solution: x,
                dual: Vec::new(),
                pivots: self.pivots,
                phase1_residual: residual,
            });
        }
        let r = self.reduced_costs(&cost);
        let dual: Vec<f64> = self.duals(&r, 0.0).into_iter().map(|y| flip * y).collect();
        let value = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpResult {
            status: LpStatus::Optimal,
            value,
            solution: x,
            dual,
            pivots: self.pivots,
            phase1_residual: residual,
        })
    }
}
