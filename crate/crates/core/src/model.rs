//! Value types shared by every analysis: observed tables, Bell behaviors,
//! correlators, intervals and response-type distributions.
//!
//! Outcome bits map onto signs as `0 ↦ +1`, `1 ↦ −1` everywhere in the crate.

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};

/// Sign attached to an outcome bit.
#[inline]
pub fn sign(bit: usize) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Outcome bit attached to a sign.
#[inline]
pub fn bit(sign: i8) -> usize {
    usize::from(sign < 0)
}

fn check_entries(what: &'static str, entries: impl Iterator<Item = f64>) -> Result<()> {
    for v in entries {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::NegativeProbability { what, value: v });
        }
    }
    Ok(())
}

fn check_sum(what: &'static str, sum: f64, tol: f64) -> Result<()> {
    if (sum - 1.0).abs() > tol {
        return Err(Error::NotNormalized { what, sum });
    }
    Ok(())
}

/// `P(Y = y, X = x | Z = z)` for binary instrument, treatment and outcome,
/// indexed `[y][x][z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedIVTable {
    p: [[[f64; 2]; 2]; 2],
}

impl ObservedIVTable {
    pub fn new(p: [[[f64; 2]; 2]; 2]) -> Result<Self> {
        Self::with_tolerance(p, Tolerances::default().normalization)
    }

    pub fn with_tolerance(p: [[[f64; 2]; 2]; 2], tol: f64) -> Result<Self> {
        check_entries("observed IV table", p.iter().flatten().flatten().copied())?;
        for z in 0..2 {
            let s: f64 = (0..2)
                .flat_map(|y| (0..2).map(move |x| (y, x)))
                .map(|(y, x)| p[y][x][z])
                .sum();
            check_sum("observed IV table", s, tol)?;
        }
        Ok(Self { p })
    }

    /// Rescales each `z` slice to sum to one. Negative or all-zero slices are still rejected.
    pub fn renormalize(mut p: [[[f64; 2]; 2]; 2]) -> Result<Self> {
        check_entries("observed IV table", p.iter().flatten().flatten().copied())?;
        for z in 0..2 {
            let s: f64 = (0..4).map(|k| p[k / 2][k % 2][z]).sum();
            if s <= 0.0 {
                return Err(Error::NotNormalized {
                    what: "observed IV table",
                    sum: s,
                });
            }
            for k in 0..4 {
                p[k / 2][k % 2][z] /= s;
            }
        }
        Self::new(p)
    }

    /// Perfect compliance (`X = Z`) with the given `P(Y=1 | X=1)` and `P(Y=1 | X=0)`.
    pub fn perfect_compliance(p_y1_given_x1: f64, p_y1_given_x0: f64) -> Result<Self> {
        for (name, v) in [("P(Y=1|X=1)", p_y1_given_x1), ("P(Y=1|X=0)", p_y1_given_x0)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain {
                    name,
                    value: v,
                    domain: "[0, 1]",
                });
            }
        }
        let mut p = [[[0.0; 2]; 2]; 2];
        p[1][1][1] = p_y1_given_x1;
        p[0][1][1] = 1.0 - p_y1_given_x1;
        p[1][0][0] = p_y1_given_x0;
        p[0][0][0] = 1.0 - p_y1_given_x0;
        Self::new(p)
    }

    #[inline]
    pub fn prob(&self, y: usize, x: usize, z: usize) -> f64 {
        self.p[y][x][z]
    }

    pub fn as_array(&self) -> &[[[f64; 2]; 2]; 2] {
        &self.p
    }
}

/// `P(A = a, B = b | X = x, Y = y)` for the two-setting, two-outcome Bell scenario,
/// indexed `[a][b][x][y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Behavior {
    p: [[[[f64; 2]; 2]; 2]; 2],
    signaling: bool,
}

impl Behavior {
    pub fn new(p: [[[[f64; 2]; 2]; 2]; 2]) -> Result<Self> {
        Self::with_tolerances(p, &Tolerances::default())
    }

    /// Validates entries and normalization; signaling tables are accepted and flagged.
    pub fn with_tolerances(p: [[[[f64; 2]; 2]; 2]; 2], tol: &Tolerances) -> Result<Self> {
        check_entries("behavior", p.iter().flatten().flatten().flatten().copied())?;
        for x in 0..2 {
            for y in 0..2 {
                check_sum("behavior", Self::block_sum(&p, x, y), tol.normalization)?;
            }
        }
        let signaling = Self::max_signaling(&p) > tol.no_signaling;
        Ok(Self { p, signaling })
    }

    pub fn renormalize(mut p: [[[[f64; 2]; 2]; 2]; 2]) -> Result<Self> {
        check_entries("behavior", p.iter().flatten().flatten().flatten().copied())?;
        for x in 0..2 {
            for y in 0..2 {
                let s = Self::block_sum(&p, x, y);
                if s <= 0.0 {
                    return Err(Error::NotNormalized {
                        what: "behavior",
                        sum: s,
                    });
                }
                for a in 0..2 {
                    for b in 0..2 {
                        p[a][b][x][y] /= s;
                    }
                }
            }
        }
        Self::new(p)
    }

    fn block_sum(p: &[[[[f64; 2]; 2]; 2]; 2], x: usize, y: usize) -> f64 {
        p[0][0][x][y] + p[0][1][x][y] + p[1][0][x][y] + p[1][1][x][y]
    }

    /// Largest change of a one-sided marginal under the remote party's setting.
    fn max_signaling(p: &[[[[f64; 2]; 2]; 2]; 2]) -> f64 {
        let mut worst: f64 = 0.0;
        for o in 0..2 {
            for s in 0..2 {
                let alice = |y: usize| p[o][0][s][y] + p[o][1][s][y];
                let bob = |x: usize| p[0][o][x][s] + p[1][o][x][s];
                worst = worst.max((alice(0) - alice(1)).abs());
                worst = worst.max((bob(0) - bob(1)).abs());
            }
        }
        worst
    }

    #[inline]
    pub fn prob(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[a][b][x][y]
    }

    pub fn as_array(&self) -> &[[[[f64; 2]; 2]; 2]; 2] {
        &self.p
    }

    /// Flattened with index `8a + 4b + 2x + y`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.p.iter().flatten().flatten().flatten().copied().collect()
    }

    pub fn is_no_signaling(&self) -> bool {
        !self.signaling
    }

    pub fn signaling_magnitude(&self) -> f64 {
        Self::max_signaling(&self.p)
    }

    pub fn uniform() -> Self {
        Self {
            p: [[[[0.25; 2]; 2]; 2]; 2],
            signaling: false,
        }
    }

    /// Popescu-Rohrlich box: `p(a,b|x,y) = 1/2` iff `a ⊕ b = x·y`.
    pub fn pr_box() -> Self {
        let mut p = [[[[0.0; 2]; 2]; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        if a ^ b == x & y {
                            p[a][b][x][y] = 0.5;
                        }
                    }
                }
            }
        }
        Self {
            p,
            signaling: false,
        }
    }

    /// The behavior with unbiased marginals whose correlators equal `c`.
    pub fn from_correlations(c: &CorrelationTable) -> Self {
        let mut p = [[[[0.0; 2]; 2]; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        p[a][b][x][y] = 0.25 * (1.0 + sign(a) * sign(b) * c.get(x, y));
                    }
                }
            }
        }
        Self {
            p,
            signaling: false,
        }
    }

    /// `w·self + (1 − w)·other`.
    pub fn mix(&self, other: &Behavior, w: f64) -> Result<Behavior> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::Domain {
                name: "mixing weight",
                value: w,
                domain: "[0, 1]",
            });
        }
        let mut p = [[[[0.0; 2]; 2]; 2]; 2];
        for (k, v) in p.iter_mut().flatten().flatten().flatten().enumerate() {
            let (a, b, x, y) = (k >> 3 & 1, k >> 2 & 1, k >> 1 & 1, k & 1);
            *v = w * self.p[a][b][x][y] + (1.0 - w) * other.p[a][b][x][y];
        }
        Behavior::new(p)
    }

    /// Convex combination with arbitrary non-negative weights summing to one.
    pub fn mixture(parts: &[(f64, Behavior)]) -> Result<Behavior> {
        let mut p = [[[[0.0; 2]; 2]; 2]; 2];
        for (w, b) in parts {
            if *w < 0.0 {
                return Err(Error::NegativeProbability {
                    what: "mixture weight",
                    value: *w,
                });
            }
            for (dst, src) in p
                .iter_mut()
                .flatten()
                .flatten()
                .flatten()
                .zip(b.p.iter().flatten().flatten().flatten())
            {
                *dst += w * src;
            }
        }
        Behavior::new(p)
    }
}

/// Correlators `E[A_x B_y]` indexed `[x][y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    e: [[f64; 2]; 2],
}

impl CorrelationTable {
    pub fn new(e: [[f64; 2]; 2]) -> Result<Self> {
        for v in e.iter().flatten() {
            if !v.is_finite() || v.abs() > 1.0 + 1e-12 {
                return Err(Error::Domain {
                    name: "correlator",
                    value: *v,
                    domain: "[-1, 1]",
                });
            }
        }
        Ok(Self { e })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.e[x][y]
    }

    pub fn as_array(&self) -> &[[f64; 2]; 2] {
        &self.e
    }
}

/// `(E[AB], E[AC], E[BC])` for three ±1 variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTriple {
    pub e_ab: f64,
    pub e_ac: f64,
    pub e_bc: f64,
}

impl CorrelationTriple {
    pub fn new(e_ab: f64, e_ac: f64, e_bc: f64) -> Result<Self> {
        for v in [e_ab, e_ac, e_bc] {
            if !v.is_finite() || v.abs() > 1.0 + 1e-12 {
                return Err(Error::Domain {
                    name: "correlator",
                    value: v,
                    domain: "[-1, 1]",
                });
            }
        }
        Ok(Self { e_ab, e_ac, e_bc })
    }
}

/// Closed real interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi + 1e-12) {
            return Err(Error::InvertedInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    pub fn is_within(&self, outer: &Interval, tol: f64) -> bool {
        self.lo >= outer.lo - tol && self.hi <= outer.hi + tol
    }
}

/// Distribution over the 16 response types, flat index `4·i + j` where `i`
/// is the treatment response (Z → X) and `j` the outcome response (X → Y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseTypeDist {
    q: [f64; 16],
}

impl ResponseTypeDist {
    pub fn new(q: [f64; 16]) -> Result<Self> {
        check_entries("response-type distribution", q.iter().copied())?;
        check_sum(
            "response-type distribution",
            q.iter().sum(),
            Tolerances::default().normalization,
        )?;
        Ok(Self { q })
    }

    pub fn weights(&self) -> &[f64; 16] {
        &self.q
    }
}

/// Linear functional `Σ c[x][y]·E[A_x B_y]` on correlators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFunctional {
    pub c: [[f64; 2]; 2],
}

impl CorrelationFunctional {
    pub fn new(c: [[f64; 2]; 2]) -> Self {
        Self { c }
    }

    /// `E00 + E01 + E10 − E11`.
    pub fn chsh() -> Self {
        Self::new([[1.0, 1.0], [1.0, -1.0]])
    }

    /// The eight sign variants of CHSH. Index `2k + s`: the minus sign sits on
    /// term `k` (in order `(1,1), (1,0), (0,1), (0,0)`) and `s = 1` negates the whole expression.
    pub fn chsh_variants() -> [ChshVariant; 8] {
        let mut out = [ChshVariant {
            negated_term: (1, 1),
            flipped: false,
        }; 8];
        let terms = [(1, 1), (1, 0), (0, 1), (0, 0)];
        for (k, t) in terms.into_iter().enumerate() {
            for s in 0..2 {
                out[2 * k + s] = ChshVariant {
                    negated_term: t,
                    flipped: s == 1,
                };
            }
        }
        out
    }

    pub fn evaluate(&self, e: &CorrelationTable) -> f64 {
        let mut s = 0.0;
        for x in 0..2 {
            for y in 0..2 {
                s += self.c[x][y] * e.get(x, y);
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChshVariant {
    pub negated_term: (usize, usize),
    pub flipped: bool,
}

impl ChshVariant {
    pub fn functional(&self) -> CorrelationFunctional {
        let mut c = [[1.0; 2]; 2];
        let (x, y) = self.negated_term;
        c[x][y] = -1.0;
        if self.flipped {
            for v in c.iter_mut().flatten() {
                *v = -*v;
            }
        }
        CorrelationFunctional { c }
    }

    pub fn label(&self) -> String {
        let mut s = String::new();
        let f = self.functional();
        for x in 0..2 {
            for y in 0..2 {
                s.push(if f.c[x][y] > 0.0 { '+' } else { '-' });
                s.push_str(&format!("E{x}{y}"));
            }
        }
        s
    }
}

/// `e[x][y] = Σ (−1)^{a+b} p(a,b|x,y)`.
pub fn behavior_to_correlations(b: &Behavior) -> CorrelationTable {
    let mut e = [[0.0; 2]; 2];
    for (x, row) in e.iter_mut().enumerate() {
        for (y, v) in row.iter_mut().enumerate() {
            *v = (0..4)
                .map(|k| sign(k >> 1) * sign(k & 1) * b.prob(k >> 1, k & 1, x, y))
                .sum();
        }
    }
    CorrelationTable { e }
}

/// `S = e00 + e01 + e10 − e11`.
pub fn chsh_value(c: &CorrelationTable) -> f64 {
    c.get(0, 0) + c.get(0, 1) + c.get(1, 0) - c.get(1, 1)
}

/// All eight CHSH variants evaluated on `c`, in [`CorrelationFunctional::chsh_variants`] order.
pub fn chsh_variant_values(c: &CorrelationTable) -> [(ChshVariant, f64); 8] {
    CorrelationFunctional::chsh_variants().map(|v| (v, v.functional().evaluate(c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::SQRT_2;

    #[test]
    fn uniform_behavior_has_zero_correlations() {
        let e = behavior_to_correlations(&Behavior::uniform());
        for v in e.as_array().iter().flatten() {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn pr_box_correlations() {
        let e = behavior_to_correlations(&Behavior::pr_box());
        assert_eq!(e.as_array(), &[[1.0, 1.0], [1.0, -1.0]]);
        assert_eq!(chsh_value(&e), 4.0);
    }

    #[test]
    fn chsh_examples() {
        let det = CorrelationTable::new([[1.0; 2]; 2]).unwrap();
        assert_eq!(chsh_value(&det), 2.0);
        let h = SQRT_2 / 2.0;
        let ts = CorrelationTable::new([[h, h], [h, -h]]).unwrap();
        assert_abs_diff_eq!(chsh_value(&ts), 2.0 * SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn variants_are_distinct_and_first_is_standard() {
        let vs = CorrelationFunctional::chsh_variants();
        assert_eq!(vs[0].functional(), CorrelationFunctional::chsh());
        for i in 0..8 {
            for j in i + 1..8 {
                assert_ne!(vs[i].functional(), vs[j].functional());
            }
        }
        assert_eq!(vs[0].label(), "+E00+E01+E10-E11");
    }

    #[test]
    fn rejects_unnormalized_and_negative() {
        let mut p = [[[[0.25; 2]; 2]; 2]; 2];
        p[0][0][0][0] = 0.26;
        assert!(matches!(
            Behavior::new(p),
            Err(Error::NotNormalized { .. })
        ));
        let fixed = Behavior::renormalize(p).unwrap();
        assert_abs_diff_eq!(
            (0..4).map(|k| fixed.prob(k >> 1, k & 1, 0, 0)).sum::<f64>(),
            1.0,
            epsilon = 1e-15
        );
        p[0][0][0][0] = -0.01;
        assert!(matches!(
            Behavior::new(p),
            Err(Error::NegativeProbability { .. })
        ));
    }

    #[test]
    fn signaling_is_flagged_not_rejected() {
        // Alice's outcome copies Bob's setting.
        let mut p = [[[[0.0; 2]; 2]; 2]; 2];
        for x in 0..2 {
            for y in 0..2 {
                p[y][0][x][y] = 1.0;
            }
        }
        let b = Behavior::new(p).unwrap();
        assert!(!b.is_no_signaling());
        assert!(Behavior::pr_box().is_no_signaling());
    }

    #[test]
    fn iv_table_validation() {
        let t = ObservedIVTable::perfect_compliance(0.7, 0.4).unwrap();
        assert_eq!(t.prob(1, 1, 1), 0.7);
        let mut p = *t.as_array();
        p[0][0][0] += 0.1;
        assert!(ObservedIVTable::new(p).is_err());
        assert!(ObservedIVTable::renormalize(p).is_ok());
    }

    #[test]
    fn interval_order() {
        assert!(Interval::new(0.0, 1.0).is_ok());
        assert!(Interval::new(1.0, 1.0 - 1e-13).is_ok());
        assert!(Interval::new(1.0, 0.0).is_err());
    }

    #[test]
    fn correlation_bounds() {
        assert!(CorrelationTable::new([[1.5, 0.0], [0.0, 0.0]]).is_err());
        assert!(CorrelationTriple::new(0.0, -1.0, 1.1).is_err());
    }
}
