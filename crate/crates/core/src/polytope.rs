//! The local-realist polytope of the CHSH scenario and its classical relatives:
//! deterministic strategies, membership by LP, Fine's equivalence, the
//! Boole-Bell inequality and Fréchet-Hoeffding bounds.
//!
//! Strategy `k` (in `0..16`) has bits `(a0, a1, b0, b1)` with `a0` most
//! significant, bit 0 meaning `+1`. Read as a response type, `(a0, a1)` is the
//! treatment response `r_X(z)` and `(b0, b1)` the outcome response `r_Y(x)`,
//! so strategy `k` is response type `(i, j) = (k / 4, k % 4)`:
//!
//! | index | bits  | treatment (i) | outcome (j)    |
//! |-------|-------|---------------|----------------|
//! | 0     | 00    | never-taker   | never-recover  |
//! | 1     | 01    | complier      | helped         |
//! | 2     | 10    | defier        | hurt           |
//! | 3     | 11    | always-taker  | always-recover |

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::model::{
    behavior_to_correlations, bit, chsh_variant_values, sign, Behavior, ChshVariant,
    CorrelationFunctional, CorrelationTable, CorrelationTriple, Interval,
};
use crate::opt::{lp_solve_with, LpProblem, LpStatus, Sense};
use crate::oracle::{oracle_joint_feasibility_with, AtomGrid, MomentConstraint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    pub a0: i8,
    pub a1: i8,
    pub b0: i8,
    pub b1: i8,
}

impl DeterministicStrategy {
    pub fn from_index(k: usize) -> Self {
        let s = |shift: usize| sign((k >> shift) & 1) as i8;
        Self {
            a0: s(3),
            a1: s(2),
            b0: s(1),
            b1: s(0),
        }
    }

    pub fn index(&self) -> usize {
        bit(self.a0) << 3 | bit(self.a1) << 2 | bit(self.b0) << 1 | bit(self.b1)
    }

    /// Response-type pair `(i, j)` under the Bell/IV identification.
    pub fn response_pair(&self) -> (usize, usize) {
        let k = self.index();
        (k >> 2, k & 3)
    }

    pub fn from_response_pair(i: usize, j: usize) -> Self {
        Self::from_index(4 * (i & 3) + (j & 3))
    }

    pub fn alice(&self, x: usize) -> i8 {
        if x == 0 {
            self.a0
        } else {
            self.a1
        }
    }

    pub fn bob(&self, y: usize) -> i8 {
        if y == 0 {
            self.b0
        } else {
            self.b1
        }
    }

    pub fn behavior(&self) -> Behavior {
        let mut p = [[[[0.0; 2]; 2]; 2]; 2];
        for x in 0..2 {
            for y in 0..2 {
                p[bit(self.alice(x))][bit(self.bob(y))][x][y] = 1.0;
            }
        }
        Behavior::new(p).expect("deterministic behavior is normalized")
    }

    pub fn correlations(&self) -> CorrelationTable {
        let mut e = [[0.0; 2]; 2];
        for (x, row) in e.iter_mut().enumerate() {
            for (y, v) in row.iter_mut().enumerate() {
                *v = f64::from(self.alice(x) * self.bob(y));
            }
        }
        CorrelationTable::new(e).expect("±1 products")
    }
}

/// All 16 strategies in lexicographic `(a0, a1, b0, b1)` order, `+1` first.
pub fn enumerate_strategies() -> [DeterministicStrategy; 16] {
    std::array::from_fn(DeterministicStrategy::from_index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "member", rename_all = "snake_case")]
pub enum MembershipCertificate {
    /// Mixing weights over the 16 strategies reproducing the behavior.
    Local { weights: [f64; 16] },
    /// The most violated CHSH variant, plus a separating vector `y` over the 16
    /// behavior entries with `y·D_k ≤ 0` for every strategy and `y·p > 0`.
    /// For signaling behaviors the facet value may not exceed 2.
    Nonlocal {
        facet: ChshVariant,
        facet_value: f64,
        signaling: bool,
        separating: Vec<f64>,
    },
}

impl MembershipCertificate {
    pub fn is_member(&self) -> bool {
        matches!(self, MembershipCertificate::Local { .. })
    }
}

fn best_chsh_variant(c: &CorrelationTable) -> (ChshVariant, f64) {
    chsh_variant_values(c)
        .into_iter()
        .fold(None::<(ChshVariant, f64)>, |best, (v, s)| match best {
            Some((_, bs)) if bs >= s => best,
            _ => Some((v, s)),
        })
        .expect("eight variants")
}

pub fn local_membership(b: &Behavior) -> Result<MembershipCertificate> {
    local_membership_with(b, &Tolerances::default())
}

/// Decides membership by an LP over mixing weights of the 16 strategy behaviors.
pub fn local_membership_with(b: &Behavior, tol: &Tolerances) -> Result<MembershipCertificate> {
    let columns: Vec<Vec<f64>> = enumerate_strategies().iter().map(|s| s.behavior().to_vec()).collect();
    let target = b.to_vec();
    let a: Vec<Vec<f64>> = (0..16).map(|r| columns.iter().map(|c| c[r]).collect()).collect();
    let r = lp_solve_with(&LpProblem::feasibility(a, target.clone())?, tol)?;
    match r.status {
        LpStatus::Optimal => {
            let mut weights = [0.0; 16];
            weights.copy_from_slice(&r.solution);
            Ok(MembershipCertificate::Local { weights })
        }
        _ => {
            let (facet, facet_value) = best_chsh_variant(&behavior_to_correlations(b));
            Ok(MembershipCertificate::Nonlocal {
                facet,
                facet_value,
                signaling: !b.is_no_signaling(),
                separating: r.dual,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineCheck {
    pub joint_exists: bool,
    pub all_chsh_hold: bool,
}

impl FineCheck {
    pub fn agrees(&self) -> bool {
        self.joint_exists == self.all_chsh_hold
    }
}

pub fn fine_check(b: &Behavior) -> Result<FineCheck> {
    fine_check_with(b, &Tolerances::default())
}

/// Joint distribution over `(A0, A1, B0, B1)` versus the eight CHSH inequalities.
pub fn fine_check_with(b: &Behavior, tol: &Tolerances) -> Result<FineCheck> {
    if !b.is_no_signaling() {
        return Err(Error::Signaling);
    }
    let grid = AtomGrid::binary(4)?;
    let mut cons = Vec::with_capacity(16);
    for a in 0..2 {
        for bb in 0..2 {
            for x in 0..2 {
                for y in 0..2 {
                    cons.push(MomentConstraint::event(
                        &grid,
                        &[(x, a), (2 + y, bb)],
                        b.prob(a, bb, x, y),
                    ));
                }
            }
        }
    }
    let joint_exists = oracle_joint_feasibility_with(&cons, &grid, tol)?.feasible;
    let all_chsh_hold = chsh_variant_values(&behavior_to_correlations(b))
        .iter()
        .all(|(_, s)| *s <= 2.0 + tol.facet);
    Ok(FineCheck {
        joint_exists,
        all_chsh_hold,
    })
}

/// `slack = (1 − E[BC]) − |E[AB] − E[AC]|`; holds when `slack ≥ −1e-12`.
pub fn boole_bell_check(t: &CorrelationTriple) -> (bool, f64) {
    let slack = (1.0 - t.e_bc) - (t.e_ab - t.e_ac).abs();
    (slack >= -1e-12, slack)
}

pub fn triple_feasibility(t: &CorrelationTriple) -> Result<bool> {
    triple_feasibility_with(t, &Tolerances::default())
}

/// LP over the eight atoms of `{±1}³` matching the three pair correlations.
pub fn triple_feasibility_with(t: &CorrelationTriple, tol: &Tolerances) -> Result<bool> {
    let g = AtomGrid::binary(3)?;
    let cons = [
        MomentConstraint::correlation(&g, 0, 1, t.e_ab),
        MomentConstraint::correlation(&g, 0, 2, t.e_ac),
        MomentConstraint::correlation(&g, 1, 2, t.e_bc),
    ];
    Ok(oracle_joint_feasibility_with(&cons, &g, tol)?.feasible)
}

/// `[W(u,v), M(u,v)] = [max(u+v−1, 0), min(u, v)]`.
pub fn frechet_bounds(u: f64, v: f64) -> Result<Interval> {
    for (name, x) in [("u", u), ("v", v)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain {
                name,
                value: x,
                domain: "[0, 1]",
            });
        }
    }
    let hi = u.min(v);
    // W ≤ M exactly; `u + v − 1` can round above `min(u, v)` when one argument is 1.
    Interval::new((u + v - 1.0).max(0.0).min(hi), hi)
}

fn functional_on_strategy(f: &CorrelationFunctional, s: &DeterministicStrategy) -> f64 {
    f.evaluate(&s.correlations())
}

/// Expected value of the correlator functional as a linear form on the 16
/// behavior entries (index `8a + 4b + 2x + y`).
fn functional_on_behavior_entries(f: &CorrelationFunctional) -> Vec<f64> {
    (0..16)
        .map(|k| {
            let (a, b, x, y) = (k >> 3 & 1, k >> 2 & 1, k >> 1 & 1, k & 1);
            f.c[x][y] * sign(a) * sign(b)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeMax {
    pub value: f64,
    pub pivots: usize,
}

/// Maximum of the functional over the local polytope (LP over strategy weights).
pub fn local_max(f: &CorrelationFunctional, tol: &Tolerances) -> Result<PolytopeMax> {
    let obj: Vec<f64> = enumerate_strategies().iter().map(|s| functional_on_strategy(f, s)).collect();
    let p = LpProblem::new(obj, vec![vec![1.0; 16]], vec![1.0], Sense::Max)?;
    let r = lp_solve_with(&p, tol)?;
    Ok(PolytopeMax {
        value: r.value,
        pivots: r.pivots,
    })
}

/// Constraint rows of the no-signaling polytope over the 16 behavior entries.
pub fn no_signaling_constraints() -> (Vec<Vec<f64>>, Vec<f64>) {
    let idx = |a: usize, b: usize, x: usize, y: usize| 8 * a + 4 * b + 2 * x + y;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for x in 0..2 {
        for y in 0..2 {
            let mut r = vec![0.0; 16];
            for a in 0..2 {
                for b in 0..2 {
                    r[idx(a, b, x, y)] = 1.0;
                }
            }
            rows.push(r);
            rhs.push(1.0);
        }
    }
    for o in 0..2 {
        for s in 0..2 {
            // Alice's marginal for setting s, outcome o, does not depend on y.
            let mut r = vec![0.0; 16];
            for b in 0..2 {
                r[idx(o, b, s, 0)] += 1.0;
                r[idx(o, b, s, 1)] -= 1.0;
            }
            rows.push(r);
            rhs.push(0.0);
            // Bob's marginal for setting s, outcome o, does not depend on x.
            let mut r = vec![0.0; 16];
            for a in 0..2 {
                r[idx(a, o, 0, s)] += 1.0;
                r[idx(a, o, 1, s)] -= 1.0;
            }
            rows.push(r);
            rhs.push(0.0);
        }
    }
    (rows, rhs)
}

/// Maximum of the functional over the no-signaling polytope.
pub fn no_signaling_max(f: &CorrelationFunctional, tol: &Tolerances) -> Result<PolytopeMax> {
    let (a, b) = no_signaling_constraints();
    let p = LpProblem::new(functional_on_behavior_entries(f), a, b, Sense::Max)?;
    let r = lp_solve_with(&p, tol)?;
    Ok(PolytopeMax {
        value: r.value,
        pivots: r.pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::chsh_value;
    use crate::oracle::oracle_extremal_scan_vertices;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sixteen_strategies_in_order() {
        let s = enumerate_strategies();
        assert_eq!(s.len(), 16);
        assert_eq!(s[0], DeterministicStrategy { a0: 1, a1: 1, b0: 1, b1: 1 });
        assert_eq!(s[15], DeterministicStrategy { a0: -1, a1: -1, b0: -1, b1: -1 });
        assert_eq!(chsh_value(&s[0].correlations()), 2.0);
        for (k, st) in s.iter().enumerate() {
            assert_eq!(st.index(), k);
            let (i, j) = st.response_pair();
            assert_eq!(DeterministicStrategy::from_response_pair(i, j), *st);
        }
    }

    #[test]
    fn response_pair_table() {
        // complier: treatment follows the instrument; helped: outcome follows treatment.
        let s = DeterministicStrategy::from_response_pair(1, 1);
        assert_eq!((bit(s.alice(0)), bit(s.alice(1))), (0, 1));
        assert_eq!((bit(s.bob(0)), bit(s.bob(1))), (0, 1));
        let defier_hurt = DeterministicStrategy::from_response_pair(2, 2);
        assert_eq!((bit(defier_hurt.alice(0)), bit(defier_hurt.alice(1))), (1, 0));
        assert_eq!((bit(defier_hurt.bob(0)), bit(defier_hurt.bob(1))), (1, 0));
    }

    #[test]
    fn facets_are_sharp() {
        let vertices: Vec<Vec<f64>> = enumerate_strategies()
            .iter()
            .map(|s| s.correlations().as_array().iter().flatten().copied().collect())
            .collect();
        for v in CorrelationFunctional::chsh_variants() {
            let c: Vec<f64> = v.functional().c.iter().flatten().copied().collect();
            let r = oracle_extremal_scan_vertices(&c, &vertices).unwrap();
            assert_eq!((r.lo, r.hi), (-2.0, 2.0));
        }
    }

    #[test]
    fn deterministic_behavior_is_member_with_unit_weight() {
        let s = enumerate_strategies()[0];
        match local_membership(&s.behavior()).unwrap() {
            MembershipCertificate::Local { weights } => {
                assert_abs_diff_eq!(weights[0], 1.0, epsilon = 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pr_box_is_not_member() {
        match local_membership(&Behavior::pr_box()).unwrap() {
            MembershipCertificate::Nonlocal {
                facet,
                facet_value,
                signaling,
                separating,
            } => {
                assert_eq!(facet_value, 4.0);
                assert_eq!(facet.functional(), CorrelationFunctional::chsh());
                assert!(!signaling);
                let p = Behavior::pr_box().to_vec();
                assert!(separating.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() > 0.0);
                for s in enumerate_strategies() {
                    let d = s.behavior().to_vec();
                    assert!(separating.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() <= 1e-9);
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fine_examples() {
        let u = fine_check(&Behavior::uniform()).unwrap();
        assert!(u.joint_exists && u.all_chsh_hold);
        let pr = fine_check(&Behavior::pr_box()).unwrap();
        assert!(!pr.joint_exists && !pr.all_chsh_hold);
    }

    #[test]
    fn fine_rejects_signaling() {
        let mut p = [[[[0.0; 2]; 2]; 2]; 2];
        for x in 0..2 {
            for y in 0..2 {
                p[y][0][x][y] = 1.0;
            }
        }
        let b = Behavior::new(p).unwrap();
        assert_eq!(fine_check(&b), Err(Error::Signaling));
        // Signaling behaviors are outside the local polytope even without a CHSH violation.
        match local_membership(&b).unwrap() {
            MembershipCertificate::Nonlocal {
                signaling,
                facet_value,
                ..
            } => {
                assert!(signaling);
                assert!(facet_value <= 2.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn boole_bell_examples() {
        let t = |a, b, c| CorrelationTriple::new(a, b, c).unwrap();
        assert_eq!(boole_bell_check(&t(0.0, 0.0, 0.0)), (true, 1.0));
        assert_eq!(boole_bell_check(&t(1.0, -1.0, 1.0)), (false, -2.0));
        let (holds, slack) = boole_bell_check(&t(0.6, 0.1, 0.4));
        assert!(holds);
        assert_abs_diff_eq!(slack, 0.1, epsilon = 1e-15);
        assert!(triple_feasibility(&t(0.6, 0.1, 0.4)).unwrap());
        assert!(triple_feasibility(&t(0.0, 0.0, 0.0)).unwrap());
        assert!(!triple_feasibility(&t(1.0, -1.0, 1.0)).unwrap());
    }

    #[test]
    fn frechet_examples() {
        assert_eq!(frechet_bounds(0.5, 0.5).unwrap(), Interval { lo: 0.0, hi: 0.5 });
        let r = frechet_bounds(0.8, 0.7).unwrap();
        assert_abs_diff_eq!(r.lo, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.hi, 0.7, epsilon = 1e-15);
        let r = frechet_bounds(1.0, 0.3).unwrap();
        assert_abs_diff_eq!(r.lo, 0.3, epsilon = 1e-15);
        assert_eq!(r.hi, 0.3);
        assert!(frechet_bounds(1.1, 0.3).is_err());
        assert!(frechet_bounds(0.1, -0.3).is_err());
    }

    #[test]
    fn chsh_polytope_bounds() {
        let tol = Tolerances::default();
        let f = CorrelationFunctional::chsh();
        assert_abs_diff_eq!(local_max(&f, &tol).unwrap().value, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(no_signaling_max(&f, &tol).unwrap().value, 4.0, epsilon = 1e-12);
        let single = CorrelationFunctional::new([[1.0, 0.0], [0.0, 0.0]]);
        assert_abs_diff_eq!(local_max(&single, &tol).unwrap().value, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(no_signaling_max(&single, &tol).unwrap().value, 1.0, epsilon = 1e-12);
    }
}
