//! Brute-force oracles: explicit atom grids and basis enumeration.
//!
//! These deliberately avoid the optimized paths in [`crate::causal`] and
//! [`crate::polytope`]; they exist so that every bound can be cross-checked
//! against an independent computation.

use nalgebra::{DMatrix, DVector};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::model::Interval;
use crate::opt::{lp_solve_with, LpProblem, LpStatus};
use crate::par;

/// Enumerated atoms of a joint distribution over at most five binary variables.
/// Atom `k` assigns bit `(k >> (n − 1 − i)) & 1` to variable `i`, so the first
/// variable is the most significant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomGrid {
    vars: usize,
}

impl AtomGrid {
    pub const MAX_VARS: usize = 5;

    pub fn binary(vars: usize) -> Result<Self> {
        if vars == 0 || vars > Self::MAX_VARS {
            return Err(Error::Domain {
                name: "atom grid variables",
                value: vars as f64,
                domain: "1..=5",
            });
        }
        Ok(Self { vars })
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn len(&self) -> usize {
        1 << self.vars
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn bit(&self, atom: usize, var: usize) -> usize {
        (atom >> (self.vars - 1 - var)) & 1
    }

    /// `+1` for bit 0, `−1` for bit 1.
    #[inline]
    pub fn spin(&self, atom: usize, var: usize) -> f64 {
        crate::model::sign(self.bit(atom, var))
    }
}

/// `Σ_atoms coeff[atom]·P(atom) = target`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentConstraint {
    pub coeffs: Vec<f64>,
    pub target: f64,
}

impl MomentConstraint {
    pub fn from_fn(grid: &AtomGrid, target: f64, f: impl Fn(usize) -> f64) -> Self {
        Self {
            coeffs: (0..grid.len()).map(f).collect(),
            target,
        }
    }

    /// `E[s_i s_j] = target` in the ±1 encoding.
    pub fn correlation(grid: &AtomGrid, i: usize, j: usize, target: f64) -> Self {
        Self::from_fn(grid, target, |k| grid.spin(k, i) * grid.spin(k, j))
    }

    /// `P(var_i = v_i for every (i, v_i) in assignment) = target`.
    pub fn event(grid: &AtomGrid, assignment: &[(usize, usize)], target: f64) -> Self {
        Self::from_fn(grid, target, |k| {
            f64::from(u8::from(assignment.iter().all(|&(i, v)| grid.bit(k, i) == v)))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointFeasibility {
    pub feasible: bool,
    /// Atom probabilities when feasible.
    pub weights: Option<Vec<f64>>,
    /// Phase-1 residual of the underlying LP.
    pub residual: f64,
}

/// Decides whether some distribution over the grid's atoms satisfies every constraint.
pub fn oracle_joint_feasibility(
    targets: &[MomentConstraint],
    grid: &AtomGrid,
) -> Result<JointFeasibility> {
    oracle_joint_feasibility_with(targets, grid, &Tolerances::default())
}

pub fn oracle_joint_feasibility_with(
    targets: &[MomentConstraint],
    grid: &AtomGrid,
    tol: &Tolerances,
) -> Result<JointFeasibility> {
    let n = grid.len();
    let mut a = vec![vec![1.0; n]];
    let mut b = vec![1.0];
    for t in targets {
        if t.coeffs.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "constraint has {} coefficients, grid has {n} atoms",
                t.coeffs.len()
            )));
        }
        a.push(t.coeffs.clone());
        b.push(t.target);
    }
    let r = lp_solve_with(&LpProblem::feasibility(a, b)?, tol)?;
    let feasible = r.status == LpStatus::Optimal;
    Ok(JointFeasibility {
        feasible,
        weights: feasible.then_some(r.solution),
        residual: r.phase1_residual,
    })
}

/// Min and max of `objective · v` over an explicit vertex list.
pub fn oracle_extremal_scan_vertices(objective: &[f64], vertices: &[Vec<f64>]) -> Result<Interval> {
    if vertices.is_empty() {
        return Err(Error::DimensionMismatch("empty vertex set".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in vertices {
        if v.len() != objective.len() {
            return Err(Error::DimensionMismatch(format!(
                "vertex has {} coordinates, objective has {}",
                v.len(),
                objective.len()
            )));
        }
        let val: f64 = v.iter().zip(objective).map(|(a, b)| a * b).sum();
        lo = lo.min(val);
        hi = hi.max(val);
    }
    Interval::new(lo, hi)
}

pub const MAX_BASES: u128 = 1_000_000;

/// Row-reduced, full-rank equivalent of `A x = b`, or `None` if the system is inconsistent.
fn independent_rows(a: &[Vec<f64>], b: &[f64], n: usize) -> Option<(DMatrix<f64>, DVector<f64>)> {
    let m = a.len();
    let mut aug = DMatrix::from_fn(m, n + 1, |i, j| if j < n { a[i][j] } else { b[i] });
    let mut rank = 0;
    for col in 0..n {
        if rank == m {
            break;
        }
        let (piv, val) = (rank..m)
            .map(|i| (i, aug[(i, col)].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if val < 1e-10 {
            continue;
        }
        aug.swap_rows(rank, piv);
        let p = aug[(rank, col)];
        for j in 0..=n {
            aug[(rank, j)] /= p;
        }
        for i in 0..m {
            if i != rank {
                let f = aug[(i, col)];
                if f != 0.0 {
                    for j in 0..=n {
                        aug[(i, j)] -= f * aug[(rank, j)];
                    }
                }
            }
        }
        rank += 1;
    }
    if (rank..m).any(|i| aug[(i, n)].abs() > 1e-9) {
        return None;
    }
    let rows = aug.rows(0, rank);
    Some((rows.columns(0, n).into_owned(), rows.column(n).into_owned()))
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// The `rank`-th `k`-subset of `0..n` in lexicographic order.
fn unrank_combination(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for slot in 0..k {
        let mut c = next;
        loop {
            let count = binomial(n - c - 1, k - slot - 1);
            if rank < count {
                break;
            }
            rank -= count;
            c += 1;
        }
        out.push(c);
        next = c + 1;
    }
    out
}

#[derive(Clone, Copy)]
struct Extremes {
    lo: f64,
    hi: f64,
    feasible_bases: usize,
}

impl Extremes {
    const EMPTY: Extremes = Extremes {
        lo: f64::INFINITY,
        hi: f64::NEG_INFINITY,
        feasible_bases: 0,
    };

    fn merge(self, o: Extremes) -> Extremes {
        Extremes {
            lo: self.lo.min(o.lo),
            hi: self.hi.max(o.hi),
            feasible_bases: self.feasible_bases + o.feasible_bases,
        }
    }
}

/// Result of a basis-enumeration scan.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeScan {
    pub range: Interval,
    pub bases_visited: u128,
    pub feasible_bases: usize,
}

struct ScanSetup {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: Vec<f64>,
    n: usize,
    rank: usize,
    count: u128,
}

impl ScanSetup {
    fn new(objective: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<Option<Self>> {
        let n = objective.len();
        if a.len() != b.len() || a.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("constraint system shape".into()));
        }
        let Some((ar, br)) = independent_rows(a, b, n) else {
            return Ok(None);
        };
        let rank = ar.nrows();
        let count = binomial(n, rank);
        if count > MAX_BASES {
            return Err(Error::CombinatorialBlowup {
                bases: count,
                limit: MAX_BASES,
            });
        }
        Ok(Some(Self {
            a: ar,
            b: br,
            c: objective.to_vec(),
            n,
            rank,
            count,
        }))
    }

    fn visit(&self, idx: usize) -> Extremes {
        let cols = unrank_combination(self.n, self.rank, idx as u128);
        let Some(xb) = self.basic_solution(&cols) else {
            return Extremes::EMPTY;
        };
        if xb.iter().any(|&v| v < -1e-9) {
            return Extremes::EMPTY;
        }
        let val: f64 = cols.iter().zip(&xb).map(|(&j, v)| self.c[j] * v.max(0.0)).sum();
        Extremes {
            lo: val,
            hi: val,
            feasible_bases: 1,
        }
    }

    /// Solves `A_B x_B = b` by Gaussian elimination with partial pivoting;
    /// `None` when the basis matrix is numerically singular.
    fn basic_solution(&self, cols: &[usize]) -> Option<Vec<f64>> {
        let r = self.rank;
        let w = r + 1;
        let mut m = vec![0.0; r * w];
        let mut scale = 0.0_f64;
        for i in 0..r {
            for (k, &j) in cols.iter().enumerate() {
                let v = self.a[(i, j)];
                m[i * w + k] = v;
                scale = scale.max(v.abs());
            }
            m[i * w + r] = self.b[i];
        }
        let eps = 1e-10 * scale.max(1.0);
        for k in 0..r {
            let piv = (k..r).max_by(|&i, &j| m[i * w + k].abs().total_cmp(&m[j * w + k].abs()))?;
            if m[piv * w + k].abs() <= eps {
                return None;
            }
            if piv != k {
                for j in 0..w {
                    m.swap(k * w + j, piv * w + j);
                }
            }
            let p = m[k * w + k];
            for i in (k + 1)..r {
                let f = m[i * w + k] / p;
                if f != 0.0 {
                    for j in k..w {
                        m[i * w + j] -= f * m[k * w + j];
                    }
                }
            }
        }
        let mut x = vec![0.0; r];
        for i in (0..r).rev() {
            let s: f64 = ((i + 1)..r).map(|j| m[i * w + j] * x[j]).sum();
            x[i] = (m[i * w + r] - s) / m[i * w + i];
        }
        Some(x)
    }

    fn finish(&self, e: Extremes) -> Result<Option<PolytopeScan>> {
        if e.feasible_bases == 0 {
            return Ok(None);
        }
        Ok(Some(PolytopeScan {
            range: Interval::new(e.lo, e.hi)?,
            bases_visited: self.count,
            feasible_bases: e.feasible_bases,
        }))
    }
}

/// Min and max of `objective · x` over `{x ≥ 0 : A x = b}` by visiting every
/// basic solution. `None` when the polytope is empty. Bounded polytopes only:
/// the scan never detects unbounded directions.
pub fn oracle_extremal_scan(objective: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<Option<PolytopeScan>> {
    let Some(setup) = ScanSetup::new(objective, a, b)? else {
        return Ok(None);
    };
    let e = par::map_reduce(setup.count as usize, Extremes::EMPTY, |i| setup.visit(i), Extremes::merge);
    setup.finish(e)
}

/// Single-threaded [`oracle_extremal_scan`].
pub fn oracle_extremal_scan_seq(
    objective: &[f64],
    a: &[Vec<f64>],
    b: &[f64],
) -> Result<Option<PolytopeScan>> {
    let Some(setup) = ScanSetup::new(objective, a, b)? else {
        return Ok(None);
    };
    let e = par::map_reduce_seq(setup.count as usize, Extremes::EMPTY, |i| setup.visit(i), Extremes::merge);
    setup.finish(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unranking_matches_lexicographic_order() {
        let n = 6;
        let k = 3;
        let mut expected = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    expected.push(vec![a, b, c]);
                }
            }
        }
        assert_eq!(binomial(n, k) as usize, expected.len());
        for (r, e) in expected.iter().enumerate() {
            assert_eq!(&unrank_combination(n, k, r as u128), e);
        }
    }

    #[test]
    fn empty_constraint_set_is_feasible() {
        let g = AtomGrid::binary(2).unwrap();
        assert!(oracle_joint_feasibility(&[], &g).unwrap().feasible);
    }

    #[test]
    fn grid_bit_order() {
        let g = AtomGrid::binary(3).unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!((g.bit(4, 0), g.bit(4, 1), g.bit(4, 2)), (1, 0, 0));
        assert!(AtomGrid::binary(6).is_err());
    }

    #[test]
    fn constant_objective_gives_degenerate_interval() {
        let a = vec![vec![1.0, 1.0, 1.0]];
        let r = oracle_extremal_scan(&[2.0, 2.0, 2.0], &a, &[1.0]).unwrap().unwrap();
        assert_eq!(r.range, Interval::point(2.0));
        assert_eq!(r.feasible_bases, 3);
    }

    #[test]
    fn inconsistent_system_has_no_bases() {
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(oracle_extremal_scan(&[1.0, 0.0], &a, &[1.0, 2.0]).unwrap().is_none());
    }

    #[test]
    fn blowup_guard() {
        let n = 40;
        let a: Vec<Vec<f64>> = (0..20)
            .map(|i| (0..n).map(|j| if j % 20 == i { 1.0 } else { 0.0 }).collect())
            .collect();
        let b = vec![1.0; 20];
        assert!(matches!(
            oracle_extremal_scan(&vec![0.0; n], &a, &b),
            Err(Error::CombinatorialBlowup { .. })
        ));
    }

    #[test]
    fn simplex_vertices() {
        let vs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let r = oracle_extremal_scan_vertices(&[3.0, -1.0], &vs).unwrap();
        assert_eq!((r.lo, r.hi), (-1.0, 3.0));
    }
}
