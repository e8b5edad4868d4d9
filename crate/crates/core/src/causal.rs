//! Partial identification in the binary instrumental-variable model and
//! bounds on probabilities of causation.
//!
//! Response types follow the table in [`crate::polytope`]: flat index
//! `4·i + j`, treatment response `i` in {never-taker, complier, defier,
//! always-taker}, outcome response `j` in {never-recover, helped, hurt,
//! always-recover}.

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::model::{Interval, ObservedIVTable, ResponseTypeDist};
use crate::opt::{lp_solve_with, LpProblem, LpStatus, Sense};
use crate::oracle::{AtomGrid, MomentConstraint};

/// Value of binary response function `r` (index `2·r(0) + r(1)`) at input `v`.
#[inline]
pub fn respond(r: usize, v: usize) -> usize {
    (r >> (1 - v)) & 1
}

/// Row index `4y + 2x + z` of an observed cell.
#[inline]
pub fn cell_index(y: usize, x: usize, z: usize) -> usize {
    4 * y + 2 * x + z
}

/// The 8×16 matrix mapping response-type probabilities to `P(y, x | z)`.
pub fn iv_constraint_matrix() -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; 16]; 8];
    for i in 0..4 {
        for j in 0..4 {
            for z in 0..2 {
                let x = respond(i, z);
                let y = respond(j, x);
                a[cell_index(y, x, z)][4 * i + j] = 1.0;
            }
        }
    }
    a
}

pub fn iv_observation_vector(t: &ObservedIVTable) -> Vec<f64> {
    let mut p = vec![0.0; 8];
    for y in 0..2 {
        for x in 0..2 {
            for z in 0..2 {
                p[cell_index(y, x, z)] = t.prob(y, x, z);
            }
        }
    }
    p
}

/// `c_ij = r_Y^j(1) − r_Y^j(0)`.
pub fn ace_coefficients() -> [f64; 16] {
    std::array::from_fn(|k| {
        let j = k & 3;
        respond(j, 1) as f64 - respond(j, 0) as f64
    })
}

pub fn ace_of(q: &ResponseTypeDist) -> f64 {
    ace_coefficients().iter().zip(q.weights()).map(|(c, w)| c * w).sum()
}

/// The observed table generated by a population with response-type distribution `q`.
pub fn forward_simulate(q: &ResponseTypeDist) -> ObservedIVTable {
    let mut p = [[[0.0; 2]; 2]; 2];
    for (k, w) in q.weights().iter().enumerate() {
        for z in 0..2 {
            let x = respond(k >> 2, z);
            let y = respond(k & 3, x);
            p[y][x][z] += w;
        }
    }
    ObservedIVTable::with_tolerance(p, 1e-9).expect("mixture of deterministic tables")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulaVariant {
    /// The form established in the causal-inference literature.
    #[default]
    Standard,
    /// The expression exactly as printed in the source material.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstrumentalCheck {
    pub holds: bool,
    pub value: f64,
    pub variant: FormulaVariant,
}

/// Standard: `max_x Σ_y max_z P(y, x | z)`. Paper-literal:
/// `max_z Σ_y max_x P(y, x | z)`, which never exceeds one for a valid table.
pub fn instrumental_inequality(t: &ObservedIVTable, variant: FormulaVariant) -> InstrumentalCheck {
    let outer = |f: &dyn Fn(usize) -> f64| (0..2).map(f).fold(f64::NEG_INFINITY, f64::max);
    let value = match variant {
        FormulaVariant::Standard => outer(&|x| {
            (0..2)
                .map(|y| t.prob(y, x, 0).max(t.prob(y, x, 1)))
                .sum()
        }),
        FormulaVariant::PaperLiteral => outer(&|z| {
            (0..2)
                .map(|y| t.prob(y, 0, z).max(t.prob(y, 1, z)))
                .sum()
        }),
    };
    InstrumentalCheck {
        holds: value <= 1.0 + 1e-12,
        value,
        variant,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AceBounds {
    pub interval: Interval,
    /// Response-type distributions attaining the lower and upper ends.
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
    pub pivots: usize,
    pub max_residual: f64,
}

pub fn ace_bounds(t: &ObservedIVTable) -> Result<Interval> {
    Ok(ace_bounds_with(t, &Tolerances::default())?.interval)
}

/// Sharp ACE bounds: min and max of `cᵀq` over `{q ≥ 0 : A q = p}`.
pub fn ace_bounds_with(t: &ObservedIVTable, tol: &Tolerances) -> Result<AceBounds> {
    let a = iv_constraint_matrix();
    let p = iv_observation_vector(t);
    let c = ace_coefficients().to_vec();
    let solve = |sense| -> Result<_> {
        let prob = LpProblem::new(c.clone(), a.clone(), p.clone(), sense)?;
        let r = lp_solve_with(&prob, tol)?;
        match r.status {
            LpStatus::Optimal => {
                let res = prob.residual(&r.solution);
                Ok((r, res))
            }
            _ => Err(Error::InfeasibleTable {
                residual: r.phase1_residual,
            }),
        }
    };
    let (lo, res_lo) = solve(Sense::Min)?;
    let (hi, res_hi) = solve(Sense::Max)?;
    Ok(AceBounds {
        interval: Interval::new(lo.value, hi.value)?,
        argmin: lo.solution,
        argmax: hi.solution,
        pivots: lo.pivots + hi.pivots,
        max_residual: res_lo.max(res_hi),
    })
}

fn unit_domain(name: &'static str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain {
            name,
            value: v,
            domain: "[0, 1]",
        });
    }
    Ok(())
}

/// Worst-case ATE bounds for an outcome in `[0, 1]`; always width one.
pub fn manski_bounds(e1: f64, e0: f64, px1: f64) -> Result<Interval> {
    unit_domain("E[Y|X=1]", e1)?;
    unit_domain("E[Y|X=0]", e0)?;
    unit_domain("P(X=1)", px1)?;
    let px0 = 1.0 - px1;
    let lo = e1 * px1 - (e0 * px0 + px1);
    let hi = e1 * px1 + px0 - e0 * px0;
    Interval::new(lo, hi)
}

/// Manski bounds on the table pooled with equal instrument weights.
pub fn manski_from_table(t: &ObservedIVTable) -> Interval {
    let joint = |x: usize, y: usize| 0.5 * (t.prob(y, x, 0) + t.prob(y, x, 1));
    let px1 = (joint(1, 0) + joint(1, 1)).clamp(0.0, 1.0);
    let cond = |x: usize, px: f64| if px > 0.0 { (joint(x, 1) / px).clamp(0.0, 1.0) } else { 0.0 };
    let e1 = cond(1, px1);
    let e0 = cond(0, 1.0 - px1);
    manski_bounds(e1, e0, px1).expect("pooled quantities are probabilities")
}

/// Interventional outcome probabilities `P(y_x)` (under do(X=1)) and `P(y_{x'})` (under do(X=0)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentalData {
    pub p_yx: f64,
    pub p_yxp: f64,
}

impl ExperimentalData {
    pub fn new(p_yx: f64, p_yxp: f64) -> Result<Self> {
        unit_domain("P(y_x)", p_yx)?;
        unit_domain("P(y_x')", p_yxp)?;
        Ok(Self { p_yx, p_yxp })
    }
}

/// Observational joint `P(X = x, Y = y)`, indexed `[x][y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationalData {
    p: [[f64; 2]; 2],
}

impl ObservationalData {
    pub fn new(p: [[f64; 2]; 2]) -> Result<Self> {
        Self::with_tolerance(p, Tolerances::default().normalization)
    }

    pub fn with_tolerance(p: [[f64; 2]; 2], tol: f64) -> Result<Self> {
        for v in p.iter().flatten() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::NegativeProbability {
                    what: "observational joint",
                    value: *v,
                });
            }
        }
        let s: f64 = p.iter().flatten().sum();
        if (s - 1.0).abs() > tol {
            return Err(Error::NotNormalized {
                what: "observational joint",
                sum: s,
            });
        }
        Ok(Self { p })
    }

    #[inline]
    pub fn joint(&self, x: usize, y: usize) -> f64 {
        self.p[x][y]
    }

    pub fn as_array(&self) -> &[[f64; 2]; 2] {
        &self.p
    }

    /// `P(Y = 1)`.
    pub fn p_y(&self) -> f64 {
        self.p[0][1] + self.p[1][1]
    }
}

/// Closed-form PNS bounds. The standard variant includes the fourth upper term
/// `P(y_x) − P(y_{x'}) + P(x, y') + P(x', y)`, without which the upper bound is
/// not sharp; the paper-literal variant omits it.
pub fn pns_bounds(exp: &ExperimentalData, obs: &ObservationalData, variant: FormulaVariant) -> Result<Interval> {
    check_consistency(exp, obs)?;
    let (pyx, pyxp) = (exp.p_yx, exp.p_yxp);
    let py = obs.p_y();
    let lo = [0.0, pyx - pyxp, py - pyxp, pyx - py]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut hi = [pyx, 1.0 - pyxp, obs.joint(1, 1) + obs.joint(0, 0)]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if variant == FormulaVariant::Standard {
        hi = hi.min(pyx - pyxp + obs.joint(1, 0) + obs.joint(0, 1));
    }
    if lo > hi + 1e-12 {
        return Err(Error::Inconsistent(format!("PNS lower bound {lo} exceeds upper bound {hi}")));
    }
    Interval::new(lo, hi.max(lo))
}

/// Consistency of experimental and observational data:
/// `P(x, y) ≤ P(y_x) ≤ 1 − P(x, y')` and likewise for `x'`.
fn check_consistency(exp: &ExperimentalData, obs: &ObservationalData) -> Result<()> {
    let eps = 1e-12;
    for (x, py) in [(1, exp.p_yx), (0, exp.p_yxp)] {
        let lo = obs.joint(x, 1);
        let hi = 1.0 - obs.joint(x, 0);
        if py < lo - eps || py > hi + eps {
            return Err(Error::Inconsistent(format!(
                "P(y_{x}) = {py} outside [{lo}, {hi}] implied by the observational joint",
                x = if x == 1 { "x" } else { "x'" }
            )));
        }
    }
    Ok(())
}

/// Atoms `(Y0, Y1, X)`: potential outcomes under do(X=0), do(X=1) and the observed treatment.
pub fn counterfactual_grid() -> AtomGrid {
    AtomGrid::binary(3).expect("three variables")
}

const Y0: usize = 0;
const Y1: usize = 1;
const X: usize = 2;

/// Linear constraints tying the 8-atom counterfactual joint to the data.
pub fn counterfactual_constraints(exp: &ExperimentalData, obs: &ObservationalData) -> Vec<MomentConstraint> {
    let g = counterfactual_grid();
    vec![
        MomentConstraint::event(&g, &[(Y1, 1)], exp.p_yx),
        MomentConstraint::event(&g, &[(Y0, 1)], exp.p_yxp),
        MomentConstraint::event(&g, &[(X, 1), (Y1, 1)], obs.joint(1, 1)),
        MomentConstraint::event(&g, &[(X, 1), (Y1, 0)], obs.joint(1, 0)),
        MomentConstraint::event(&g, &[(X, 0), (Y0, 1)], obs.joint(0, 1)),
        MomentConstraint::event(&g, &[(X, 0), (Y0, 0)], obs.joint(0, 0)),
    ]
}

/// Min and max of `Σ objective[atom]·P(atom)` over the counterfactual polytope.
pub fn counterfactual_lp_range(
    objective: &[f64],
    exp: &ExperimentalData,
    obs: &ObservationalData,
    tol: &Tolerances,
) -> Result<Interval> {
    let mut a: Vec<Vec<f64>> = vec![vec![1.0; 8]];
    let mut b = vec![1.0];
    for c in counterfactual_constraints(exp, obs) {
        a.push(c.coeffs);
        b.push(c.target);
    }
    let mut ends = [0.0; 2];
    for (slot, sense) in [Sense::Min, Sense::Max].into_iter().enumerate() {
        let r = lp_solve_with(&LpProblem::new(objective.to_vec(), a.clone(), b.clone(), sense)?, tol)?;
        if r.status != LpStatus::Optimal {
            return Err(Error::Inconsistent(
                "no joint of potential outcomes and treatment reproduces the data".into(),
            ));
        }
        ends[slot] = r.value;
    }
    Interval::new(ends[0], ends[1])
}

/// PNS bounds from the 8-atom LP; the independent check on [`pns_bounds`].
pub fn pns_lp_bounds(exp: &ExperimentalData, obs: &ObservationalData, tol: &Tolerances) -> Result<Interval> {
    let g = counterfactual_grid();
    let obj: Vec<f64> = (0..8)
        .map(|k| f64::from(u8::from(g.bit(k, Y1) == 1 && g.bit(k, Y0) == 0)))
        .collect();
    counterfactual_lp_range(&obj, exp, obs, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PnPsBounds {
    pub pn: Interval,
    pub ps: Interval,
}

pub fn pn_ps_point_bounds(exp: &ExperimentalData, obs: &ObservationalData) -> Result<PnPsBounds> {
    pn_ps_point_bounds_with(exp, obs, &Tolerances::default())
}

/// PN = `P(Y0 = 0 | X = 1, Y = 1)` and PS = `P(Y1 = 1 | X = 0, Y = 0)` as LP
/// bounds over the counterfactual polytope.
pub fn pn_ps_point_bounds_with(
    exp: &ExperimentalData,
    obs: &ObservationalData,
    tol: &Tolerances,
) -> Result<PnPsBounds> {
    let p11 = obs.joint(1, 1);
    let p00 = obs.joint(0, 0);
    if p11 <= 0.0 {
        return Err(Error::ZeroProbability("X=1, Y=1"));
    }
    if p00 <= 0.0 {
        return Err(Error::ZeroProbability("X=0, Y=0"));
    }
    check_consistency(exp, obs)?;
    let g = counterfactual_grid();
    let indicator = |f: &dyn Fn(usize) -> bool| -> Vec<f64> { (0..8).map(|k| f64::from(u8::from(f(k)))).collect() };
    let pn_num = indicator(&|k| g.bit(k, Y0) == 0 && g.bit(k, X) == 1 && g.bit(k, Y1) == 1);
    let ps_num = indicator(&|k| g.bit(k, Y1) == 1 && g.bit(k, X) == 0 && g.bit(k, Y0) == 0);
    let scale = |iv: Interval, d: f64| Interval::new((iv.lo / d).clamp(0.0, 1.0), (iv.hi / d).clamp(0.0, 1.0));
    Ok(PnPsBounds {
        pn: scale(counterfactual_lp_range(&pn_num, exp, obs, tol)?, p11)?,
        ps: scale(counterfactual_lp_range(&ps_num, exp, obs, tol)?, p00)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::oracle_extremal_scan;
    use approx::assert_abs_diff_eq;

    #[test]
    fn response_functions() {
        assert_eq!([respond(0, 0), respond(0, 1)], [0, 0]);
        assert_eq!([respond(1, 0), respond(1, 1)], [0, 1]);
        assert_eq!([respond(2, 0), respond(2, 1)], [1, 0]);
        assert_eq!([respond(3, 0), respond(3, 1)], [1, 1]);
        assert_eq!(ace_coefficients()[..4], [0.0, 1.0, -1.0, 0.0]);
    }

    #[test]
    fn constraint_matrix_shape() {
        let a = iv_constraint_matrix();
        assert_eq!(a.len(), 8);
        // Every type lands in exactly one cell per instrument value.
        for col in 0..16 {
            assert_eq!(a.iter().map(|r| r[col]).sum::<f64>(), 2.0);
        }
    }

    #[test]
    fn perfect_compliance_point_identifies_ace() {
        let t = ObservedIVTable::perfect_compliance(0.7, 0.4).unwrap();
        let iv = ace_bounds(&t).unwrap();
        assert_abs_diff_eq!(iv.lo, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(iv.hi, 0.3, epsilon = 1e-12);
        let scan = oracle_extremal_scan(&ace_coefficients(), &iv_constraint_matrix(), &iv_observation_vector(&t))
            .unwrap()
            .unwrap();
        assert_abs_diff_eq!(scan.range.lo, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(scan.range.hi, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn untreated_population_leaves_treated_outcome_free() {
        // Nobody is treated and nobody recovers: Y(0) = 0, Y(1) unconstrained.
        let mut p = [[[0.0; 2]; 2]; 2];
        p[0][0][0] = 1.0;
        p[0][0][1] = 1.0;
        let t = ObservedIVTable::new(p).unwrap();
        let iv = ace_bounds(&t).unwrap();
        let scan = oracle_extremal_scan(&ace_coefficients(), &iv_constraint_matrix(), &iv_observation_vector(&t))
            .unwrap()
            .unwrap();
        assert_abs_diff_eq!(iv.lo, scan.range.lo, epsilon = 1e-12);
        assert_abs_diff_eq!(iv.hi, scan.range.hi, epsilon = 1e-12);
        assert_abs_diff_eq!(iv.lo, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(iv.hi, 1.0, epsilon = 1e-12);
        // A degenerate but IV-consistent table: width reaches one.
        assert_abs_diff_eq!(iv.width(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn instrumental_examples() {
        let t = ObservedIVTable::perfect_compliance(1.0, 0.0).unwrap();
        let c = instrumental_inequality(&t, FormulaVariant::Standard);
        assert!(c.holds);
        assert_abs_diff_eq!(c.value, 1.0, epsilon = 1e-15);

        let mut p = [[[0.0; 2]; 2]; 2];
        p[1][1][0] = 1.0;
        p[0][1][1] = 1.0;
        let bad = ObservedIVTable::new(p).unwrap();
        let c = instrumental_inequality(&bad, FormulaVariant::Standard);
        assert!(!c.holds);
        assert_eq!(c.value, 2.0);
        // The literal form cannot detect it.
        assert!(instrumental_inequality(&bad, FormulaVariant::PaperLiteral).holds);
        assert!(matches!(ace_bounds(&bad), Err(Error::InfeasibleTable { .. })));
    }

    #[test]
    fn manski_examples() {
        let m = manski_bounds(0.7, 0.4, 0.5).unwrap();
        assert_abs_diff_eq!(m.lo, -0.35, epsilon = 1e-15);
        assert_abs_diff_eq!(m.hi, 0.65, epsilon = 1e-15);
        assert_eq!(manski_bounds(1.0, 0.0, 1.0).unwrap(), Interval { lo: 0.0, hi: 1.0 });
        assert!(manski_bounds(1.2, 0.0, 0.5).is_err());
    }

    fn obs(p11: f64, p10: f64, p01: f64, p00: f64) -> ObservationalData {
        ObservationalData::new([[p00, p01], [p10, p11]]).unwrap()
    }

    #[test]
    fn pns_example_matches_lp() {
        let e = ExperimentalData::new(0.7, 0.3).unwrap();
        let o = obs(0.4, 0.1, 0.2, 0.3);
        let f = pns_bounds(&e, &o, FormulaVariant::Standard).unwrap();
        assert_abs_diff_eq!(f.lo, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(f.hi, 0.7, epsilon = 1e-12);
        let lp = pns_lp_bounds(&e, &o, &Tolerances::default()).unwrap();
        assert_abs_diff_eq!(lp.lo, f.lo, epsilon = 1e-12);
        assert_abs_diff_eq!(lp.hi, f.hi, epsilon = 1e-12);
    }

    #[test]
    fn pns_equal_experiments() {
        let e = ExperimentalData::new(0.5, 0.5).unwrap();
        let o = obs(0.25, 0.25, 0.25, 0.25);
        let f = pns_bounds(&e, &o, FormulaVariant::Standard).unwrap();
        assert!(f.lo >= 0.0 && f.hi <= 0.5);
    }

    #[test]
    fn pns_inconsistent_data() {
        // P(x, y) = 0.6 exceeds P(y_x) = 0.2.
        let e = ExperimentalData::new(0.2, 0.3).unwrap();
        let o = obs(0.6, 0.1, 0.1, 0.2);
        assert!(matches!(
            pns_bounds(&e, &o, FormulaVariant::Standard),
            Err(Error::Inconsistent(_))
        ));
        assert!(pns_lp_bounds(&e, &o, &Tolerances::default()).is_err());
    }

    #[test]
    fn pn_for_deterministic_effect() {
        let e = ExperimentalData::new(1.0, 0.0).unwrap();
        let o = obs(0.5, 0.0, 0.0, 0.5);
        let b = pn_ps_point_bounds(&e, &o).unwrap();
        assert_abs_diff_eq!(b.pn.lo, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.pn.hi, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.ps.lo, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pn_null_effect_contains_no_effect_point() {
        // Under no effect Y0 = Y1 for every unit, so PN = 0.
        let e = ExperimentalData::new(0.5, 0.5).unwrap();
        let o = obs(0.25, 0.25, 0.25, 0.25);
        let b = pn_ps_point_bounds(&e, &o).unwrap();
        assert!(b.pn.contains(0.0, 1e-12));
        assert!(b.pn.lo <= b.pn.hi && b.ps.lo <= b.ps.hi);
    }

    #[test]
    fn pn_zero_conditioning() {
        let e = ExperimentalData::new(0.5, 0.5).unwrap();
        let o = obs(0.0, 0.5, 0.25, 0.25);
        assert_eq!(
            pn_ps_point_bounds(&e, &o),
            Err(Error::ZeroProbability("X=1, Y=1"))
        );
    }
}
