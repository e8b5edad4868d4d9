//! Shannon entropies (base 2), the entropic CHSH check and the polymatroid
//! outer cone for up to four variables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Behavior;

/// Base-2 entropy with `0 · log 0 = 0`.
pub fn entropy(dist: &[f64]) -> Result<f64> {
    entropy_with(dist, 1e-12)
}

pub fn entropy_with(dist: &[f64], tol: f64) -> Result<f64> {
    let mut sum = 0.0;
    for &p in dist {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::NegativeProbability {
                what: "distribution",
                value: p,
            });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > tol {
        return Err(Error::NotNormalized {
            what: "distribution",
            sum,
        });
    }
    Ok(entropy_unchecked(dist))
}

fn entropy_unchecked(dist: &[f64]) -> f64 {
    -dist.iter().filter(|&&p| p > 0.0).map(|&p| p * p.log2()).sum::<f64>()
}

/// `I(A_x : B_y)` from `p(a, b | x, y)`.
pub fn mutual_information(b: &Behavior, x: usize, y: usize) -> f64 {
    let p = |a: usize, bb: usize| b.prob(a, bb, x, y);
    let joint = [p(0, 0), p(0, 1), p(1, 0), p(1, 1)];
    let pa = [p(0, 0) + p(0, 1), p(1, 0) + p(1, 1)];
    let pb = [p(0, 0) + p(1, 0), p(0, 1) + p(1, 1)];
    // Clamp the tiny negative values that cancellation can produce.
    (entropy_unchecked(&pa) + entropy_unchecked(&pb) - entropy_unchecked(&joint)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropicChsh {
    /// `I(A0:B0) + I(A0:B1) + I(A1:B0) − I(A1:B1)`.
    pub lhs: f64,
    /// Twice the joint entropy of the settings distribution.
    pub rhs: f64,
    pub holds: bool,
}

pub fn uniform_settings() -> [[f64; 2]; 2] {
    [[0.25; 2]; 2]
}

/// Entropic CHSH check; `settings[x][y]` is the joint setting distribution.
pub fn entropic_chsh(b: &Behavior, settings: &[[f64; 2]; 2]) -> Result<EntropicChsh> {
    entropic_chsh_with(b, settings, 1e-12)
}

/// As [`entropic_chsh`], with `tol` for the settings normalization check.
pub fn entropic_chsh_with(b: &Behavior, settings: &[[f64; 2]; 2], tol: f64) -> Result<EntropicChsh> {
    let flat: Vec<f64> = settings.iter().flatten().copied().collect();
    let rhs = 2.0 * entropy_with(&flat, tol)?;
    let lhs = mutual_information(b, 0, 0) + mutual_information(b, 0, 1) + mutual_information(b, 1, 0) - mutual_information(b, 1, 1);
    Ok(EntropicChsh {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12,
    })
}

/// Joint entropies `h[S]` indexed by subset bitmask (bit `i` ↔ variable `i`);
/// `h[0] = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyVector {
    n: usize,
    h: Vec<f64>,
}

impl EntropyVector {
    /// `values[k]` is the entropy of the subset with bitmask `k + 1`.
    pub fn new(n: usize, values: &[f64]) -> Result<Self> {
        if n == 0 || n > 4 {
            return Err(Error::Domain {
                name: "n",
                value: n as f64,
                domain: "1..=4",
            });
        }
        let expected = (1 << n) - 1;
        if values.len() != expected {
            return Err(Error::IncompleteEntropyVector {
                n,
                expected,
                got: values.len(),
            });
        }
        for &v in values {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain {
                    name: "entropy",
                    value: v,
                    domain: "[0, ∞)",
                });
            }
        }
        let mut h = vec![0.0];
        h.extend_from_slice(values);
        Ok(Self { n, h })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, mask: usize) -> f64 {
        self.h[mask]
    }

    pub fn values(&self) -> &[f64] {
        &self.h[1..]
    }
}

/// Entropy vector of a joint over `arities.len()` variables; `joint` is in
/// row-major order with the first variable varying slowest.
pub fn entropy_vector_from_joint(arities: &[usize], joint: &[f64]) -> Result<EntropyVector> {
    entropy_vector_from_joint_with(arities, joint, 1e-12)
}

pub fn entropy_vector_from_joint_with(arities: &[usize], joint: &[f64], tol: f64) -> Result<EntropyVector> {
    let n = arities.len();
    let size: usize = arities.iter().product();
    if joint.len() != size {
        return Err(Error::DimensionMismatch(format!(
            "joint has {} entries, arities imply {size}",
            joint.len()
        )));
    }
    if n == 0 || n > 4 || arities.contains(&0) {
        return Err(Error::Domain {
            name: "variable count",
            value: n as f64,
            domain: "1..=4 variables, each with at least one value",
        });
    }
    entropy_with(joint, tol)?;
    let mut values = Vec::with_capacity((1usize << n).saturating_sub(1));
    for mask in 1..(1usize << n) {
        let mut marg = std::collections::BTreeMap::<Vec<usize>, f64>::new();
        for (idx, &p) in joint.iter().enumerate() {
            let mut rem = idx;
            let mut digits = vec![0; n];
            for v in (0..n).rev() {
                digits[v] = rem % arities[v];
                rem /= arities[v];
            }
            let key: Vec<usize> = (0..n).filter(|v| mask >> v & 1 == 1).map(|v| digits[v]).collect();
            *marg.entry(key).or_default() += p;
        }
        let m: Vec<f64> = marg.into_values().collect();
        values.push(entropy_unchecked(&m));
    }
    EntropyVector::new(n, &values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShannonInequality {
    /// `h[S] ≤ h[S ∪ {i}]`.
    Monotonicity { s: usize, i: usize, slack: f64 },
    /// `h[S ∪ {i}] + h[S ∪ {j}] ≥ h[S ∪ {i, j}] + h[S]`.
    Submodularity { s: usize, i: usize, j: usize, slack: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShannonCheck {
    pub member: bool,
    pub violated: Vec<ShannonInequality>,
}

pub fn shannon_cone_check(h: &EntropyVector, tol: f64) -> ShannonCheck {
    let n = h.n;
    let full = (1usize << n) - 1;
    let mut violated = Vec::new();
    for i in 0..n {
        let bi = 1 << i;
        for s in (0..=full).filter(|s| s & bi == 0) {
            let slack = h.get(s | bi) - h.get(s);
            if slack < -tol {
                violated.push(ShannonInequality::Monotonicity { s, i, slack });
            }
        }
        for j in (i + 1)..n {
            let bj = 1 << j;
            for s in (0..=full).filter(|s| s & (bi | bj) == 0) {
                let slack = h.get(s | bi) + h.get(s | bj) - h.get(s | bi | bj) - h.get(s);
                if slack < -tol {
                    violated.push(ShannonInequality::Submodularity { s, i, j, slack });
                }
            }
        }
    }
    ShannonCheck {
        member: violated.is_empty(),
        violated,
    }
}
