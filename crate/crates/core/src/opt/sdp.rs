//! Small dense semidefinite programs:
//!
//! ```text
//!   maximize ⟨C, X⟩  s.t.  ⟨A_k, X⟩ = b_k,  X ⪰ 0
//!   minimize bᵀy     s.t.  Σ y_k A_k − C = Z ⪰ 0
//! ```
//!
//! Solved with an infeasible-start primal-dual path-following method using the
//! HKM search direction and a Mehrotra predictor-corrector step.

use nalgebra::{DMatrix, DVector};

use crate::config::Tolerances;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SdpConstraint {
    pub a: DMatrix<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub n: usize,
    pub objective: DMatrix<f64>,
    pub constraints: Vec<SdpConstraint>,
}

fn check_symmetric(m: &DMatrix<f64>, n: usize, what: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::DimensionMismatch(format!("{what} is not symmetric")));
    }
    Ok(())
}

impl SdpProblem {
    pub fn new(objective: DMatrix<f64>, constraints: Vec<SdpConstraint>) -> Result<Self> {
        let n = objective.nrows();
        check_symmetric(&objective, n, "objective")?;
        for (k, c) in constraints.iter().enumerate() {
            check_symmetric(&c.a, n, &format!("constraint {k}"))?;
        }
        Ok(Self {
            n,
            objective,
            constraints,
        })
    }

    /// `⟨A_k, X⟩ − b_k` for each constraint.
    pub fn residuals(&self, x: &DMatrix<f64>) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| c.a.dot(x) - c.b)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
}

#[derive(Debug, Clone)]
pub struct SdpResult {
    pub status: SdpStatus,
    /// Primal objective `⟨C, X⟩`.
    pub value: f64,
    /// Dual objective `bᵀy`.
    pub dual_value: f64,
    pub primal: DMatrix<f64>,
    pub dual: DVector<f64>,
    pub slack: DMatrix<f64>,
    /// `|⟨C,X⟩ − bᵀy|`.
    pub duality_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub min_eigenvalue: f64,
    pub iterations: usize,
}

pub fn sdp_solve(p: &SdpProblem) -> Result<SdpResult> {
    sdp_solve_with(p, &Tolerances::default())
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

/// Largest `α` such that `X + α·D ⪰ 0`, given `X ≻ 0`.
fn max_step(x: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<f64> {
    let l = x
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SdpBreakdown("iterate lost positive definiteness".into()))?
        .l();
    let linv = l
        .try_inverse()
        .ok_or_else(|| Error::SdpBreakdown("singular Cholesky factor".into()))?;
    let w = &linv * d * linv.transpose();
    let lmin = min_eigenvalue(&w);
    Ok(if lmin >= 0.0 { f64::INFINITY } else { -1.0 / lmin })
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

pub fn sdp_solve_with(p: &SdpProblem, tol: &Tolerances) -> Result<SdpResult> {
    let n = p.n;
    let m = p.constraints.len();
    let c = &p.objective;
    let b = DVector::from_iterator(m, p.constraints.iter().map(|k| k.b));
    let a_op = |x: &DMatrix<f64>| DVector::from_iterator(m, p.constraints.iter().map(|k| k.a.dot(x)));
    let a_adj = |y: &DVector<f64>| {
        let mut s = DMatrix::zeros(n, n);
        for (k, con) in p.constraints.iter().enumerate() {
            s += &con.a * y[k];
        }
        s
    };

    let norm_b = b.norm();
    let norm_c = c.norm();
    let a_scale = p
        .constraints
        .iter()
        .map(|k| (1.0 + k.b.abs()) / (1.0 + k.a.norm()))
        .fold(1.0, f64::max);
    let mut x = DMatrix::identity(n, n) * (n as f64).sqrt() * a_scale;
    let mut z = DMatrix::identity(n, n) * (1.0 + norm_c).max((n as f64).sqrt());
    let mut y = DVector::zeros(m);

    let gap_target = 1e-3 * tol.sdp_gap;
    let inf_target = 1e-2 * tol.sdp_feasibility;

    let mut iterations = 0;
    loop {
        let rp = &b - a_op(&x);
        let rd = c - a_adj(&y) + &z;
        let pobj = c.dot(&x);
        let dobj = b.dot(&y);
        let gap = (pobj - dobj).abs();
        let pinf = rp.norm() / (1.0 + norm_b);
        let dinf = rd.norm() / (1.0 + norm_c);
        let mu = x.dot(&z) / n as f64;

        let converged = gap <= gap_target * (1.0 + pobj.abs()) && pinf <= inf_target && dinf <= inf_target;
        let acceptable = gap <= tol.sdp_gap && pinf <= tol.sdp_feasibility && dinf <= tol.sdp_feasibility;
        let finish = |x: DMatrix<f64>, y: DVector<f64>, z: DMatrix<f64>| SdpResult {
            status: SdpStatus::Optimal,
            value: pobj,
            dual_value: dobj,
            min_eigenvalue: min_eigenvalue(&x),
            primal: x,
            dual: y,
            slack: z,
            duality_gap: gap,
            primal_infeasibility: pinf,
            dual_infeasibility: dinf,
            iterations,
        };
        if converged || (iterations >= tol.sdp_max_iterations && acceptable) {
            return Ok(finish(x, y, z));
        }
        if iterations >= tol.sdp_max_iterations {
            return Err(Error::SdpNotConverged {
                iterations,
                gap,
                infeasibility: pinf.max(dinf),
            });
        }
        let step = newton_step(p, &x, &z, &rp, &rd, mu);
        let (dx, dy, dz, ap, ad) = match step {
            Ok(s) => s,
            // Near the optimum the iterates become ill-conditioned; keep the
            // current point when it already meets the requested tolerances.
            Err(_) if acceptable => return Ok(finish(x, y, z)),
            Err(e) => return Err(e),
        };
        iterations += 1;

        x += &dx * ap;
        x = sym(x);
        y += &dy * ad;
        z += &dz * ad;
        z = sym(z);
    }
}

type Step = (DMatrix<f64>, DVector<f64>, DMatrix<f64>, f64, f64);

/// One Mehrotra predictor-corrector step: directions and primal/dual step lengths.
fn newton_step(p: &SdpProblem, x: &DMatrix<f64>, z: &DMatrix<f64>, rp: &DVector<f64>, rd: &DMatrix<f64>, mu: f64) -> Result<Step> {
    let n = p.n;
    let m = p.constraints.len();
    let a_op = |x: &DMatrix<f64>| DVector::from_iterator(m, p.constraints.iter().map(|k| k.a.dot(x)));
    let a_adj = |y: &DVector<f64>| {
        let mut s = DMatrix::zeros(n, n);
        for (k, con) in p.constraints.iter().enumerate() {
            s += &con.a * y[k];
        }
        s
    };
    let zinv = z
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SdpBreakdown("dual slack lost positive definiteness".into()))?
        .inverse();

    // Schur complement M_ij = ⟨A_i, X A_j Z⁻¹⟩.
    let xaz: Vec<DMatrix<f64>> = p.constraints.iter().map(|k| x * &k.a * &zinv).collect();
    let mut schur = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            schur[(i, j)] = p.constraints[i].a.dot(&xaz[j]);
        }
    }
    let lu = schur.lu();

    let direction = |target: f64, corr: Option<&DMatrix<f64>>| -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
        let mut g = &zinv * target - x + x * rd * &zinv;
        if let Some(cm) = corr {
            g -= cm * &zinv;
        }
        let rhs = a_op(&sym(g)) - rp;
        let dy = lu
            .solve(&rhs)
            .ok_or_else(|| Error::SdpBreakdown("singular Schur complement".into()))?;
        let dz = a_adj(&dy) - rd;
        let mut dx = &zinv * target - x - x * &dz * &zinv;
        if let Some(cm) = corr {
            dx -= cm * &zinv;
        }
        Ok((sym(dx), dy, dz))
    };

    // Predictor.
    let (dx_a, _, dz_a) = direction(0.0, None)?;
    let ap = max_step(x, &dx_a)?.min(1.0);
    let ad = max_step(z, &dz_a)?.min(1.0);
    let mu_aff = (x + &dx_a * ap).dot(&(z + &dz_a * ad)) / n as f64;
    let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

    // Corrector.
    let corr = &dx_a * &dz_a;
    let (dx, dy, dz) = direction(sigma * mu, Some(&corr))?;
    let ap = (0.98 * max_step(x, &dx)?).min(1.0);
    let ad = (0.98 * max_step(z, &dz)?).min(1.0);
    Ok((dx, dy, dz, ap, ad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit(n: usize, i: usize, j: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        m[(i, j)] += 0.5;
        m[(j, i)] += 0.5;
        m
    }

    fn unit_diagonal(n: usize) -> Vec<SdpConstraint> {
        (0..n)
            .map(|i| SdpConstraint {
                a: unit(n, i, i),
                b: 1.0,
            })
            .collect()
    }

    #[test]
    fn diagonal_constraints_fix_objective() {
        let c = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let r = sdp_solve(&SdpProblem::new(c, unit_diagonal(2)).unwrap()).unwrap();
        assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-6);
        assert!(r.duality_gap <= 1e-6);
    }

    #[test]
    fn psd_correlation_bound() {
        let c = unit(2, 0, 1) * 2.0;
        let r = sdp_solve(&SdpProblem::new(c, unit_diagonal(2)).unwrap()).unwrap();
        assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.primal[(0, 1)], 1.0, epsilon = 1e-4);
        assert!(r.min_eigenvalue >= -1e-7);
        assert!(r.value <= r.dual_value + 1e-6);
    }

    #[test]
    fn max_cut_triangle() {
        // max Σ_{i<j} −X_ij over unit-diagonal 3×3 PSD: optimum 3/2 at X_ij = −1/2.
        let n = 3;
        let mut c = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                c -= unit(n, i, j) * 2.0;
            }
        }
        let c = c * 0.5;
        let r = sdp_solve(&SdpProblem::new(c, unit_diagonal(n)).unwrap()).unwrap();
        assert_abs_diff_eq!(r.value, 1.5, epsilon = 1e-6);
        assert!(r.min_eigenvalue >= -1e-7);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let mut c = DMatrix::zeros(2, 2);
        c[(0, 1)] = 1.0;
        assert!(SdpProblem::new(c, vec![]).is_err());
        let c = DMatrix::zeros(2, 2);
        let bad = SdpConstraint {
            a: DMatrix::zeros(3, 3),
            b: 0.0,
        };
        assert!(SdpProblem::new(c, vec![bad]).is_err());
    }

    #[test]
    fn iteration_budget_reported() {
        let c = unit(2, 0, 1) * 2.0;
        let tol = Tolerances {
            sdp_max_iterations: 1,
            ..Tolerances::default()
        };
        assert!(matches!(
            sdp_solve_with(&SdpProblem::new(c, unit_diagonal(2)).unwrap(), &tol),
            Err(Error::SdpNotConverged { .. })
        ));
    }
}
