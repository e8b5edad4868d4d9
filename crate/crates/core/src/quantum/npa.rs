//! Moment-matrix relaxations of the quantum correlation set for correlation
//! functionals in the two-setting, two-outcome scenario.
//!
//! Operators are the ±1 observables `A0, A1, B0, B1` (so `O² = 1`), Alice's
//! operators commute with Bob's, and the moment matrix is taken real symmetric:
//! for correlation functionals the real part of any feasible complex moment
//! matrix is feasible with the same objective value.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::Result;
use crate::model::CorrelationFunctional;
use crate::opt::{sdp_solve_with, SdpConstraint, SdpProblem, SdpResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NpaLevel {
    /// `{1, A0, A1, B0, B1}`: 5×5.
    #[default]
    #[serde(rename = "1")]
    L1,
    /// Level 1 plus the four products `A_x B_y`: 9×9.
    #[serde(rename = "1ab")]
    L1AB,
}

impl NpaLevel {
    pub fn label(&self) -> &'static str {
        match self {
            NpaLevel::L1 => "1",
            NpaLevel::L1AB => "1ab",
        }
    }
}

/// An operator word: Alice's letters then Bob's (the parties commute).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Word {
    pub alice: Vec<u8>,
    pub bob: Vec<u8>,
}

impl Word {
    pub fn identity() -> Self {
        Self {
            alice: Vec::new(),
            bob: Vec::new(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.alice.is_empty() && self.bob.is_empty()
    }

    /// Cancels adjacent repeated letters (`O·O = 1`).
    fn reduce(letters: impl IntoIterator<Item = u8>) -> Vec<u8> {
        let mut out: Vec<u8> = Vec::new();
        for l in letters {
            if out.last() == Some(&l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        out
    }

    /// The moment word of `self† · other`.
    pub fn moment(&self, other: &Word) -> Word {
        Word {
            alice: Self::reduce(self.alice.iter().rev().chain(&other.alice).copied()),
            bob: Self::reduce(self.bob.iter().rev().chain(&other.bob).copied()),
        }
    }

    fn adjoint(&self) -> Word {
        Word {
            alice: self.alice.iter().rev().copied().collect(),
            bob: self.bob.iter().rev().copied().collect(),
        }
    }

    /// Representative shared by a word and its adjoint.
    pub fn canonical(&self) -> Word {
        let adj = self.adjoint();
        if adj < *self {
            adj
        } else {
            self.clone()
        }
    }

    pub fn label(&self) -> String {
        if self.is_identity() {
            return "1".into();
        }
        let mut s = String::new();
        for a in &self.alice {
            s.push_str(&format!("A{a}"));
        }
        for b in &self.bob {
            s.push_str(&format!("B{b}"));
        }
        s
    }
}

pub fn word_set(level: NpaLevel) -> Vec<Word> {
    let a = |x: u8| Word {
        alice: vec![x],
        bob: vec![],
    };
    let b = |y: u8| Word {
        alice: vec![],
        bob: vec![y],
    };
    let mut words = vec![Word::identity(), a(0), a(1), b(0), b(1)];
    if level == NpaLevel::L1AB {
        for x in 0..2 {
            for y in 0..2 {
                words.push(Word {
                    alice: vec![x],
                    bob: vec![y],
                });
            }
        }
    }
    words
}

/// A moment-matrix SDP instance: word index, entry identifications and objective.
#[derive(Debug, Clone)]
pub struct MomentProgram {
    pub level: NpaLevel,
    pub words: Vec<Word>,
    /// Upper-triangular entries grouped by their canonical moment.
    pub classes: BTreeMap<Word, Vec<(usize, usize)>>,
    pub sdp: SdpProblem,
}

fn sym_unit(n: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    m[(i, j)] += 0.5;
    m[(j, i)] += 0.5;
    m
}

impl MomentProgram {
    pub fn build(level: NpaLevel, functional: &CorrelationFunctional) -> Result<Self> {
        let words = word_set(level);
        let n = words.len();
        let mut classes: BTreeMap<Word, Vec<(usize, usize)>> = BTreeMap::new();
        for i in 0..n {
            for j in i..n {
                classes
                    .entry(words[i].moment(&words[j]).canonical())
                    .or_default()
                    .push((i, j));
            }
        }

        let mut constraints = Vec::new();
        for (key, entries) in &classes {
            if key.is_identity() {
                for &(i, j) in entries {
                    constraints.push(SdpConstraint {
                        a: sym_unit(n, i, j),
                        b: 1.0,
                    });
                }
            } else {
                let (i0, j0) = entries[0];
                for &(i, j) in &entries[1..] {
                    constraints.push(SdpConstraint {
                        a: sym_unit(n, i, j) - sym_unit(n, i0, j0),
                        b: 0.0,
                    });
                }
            }
        }

        let mut objective = DMatrix::zeros(n, n);
        for x in 0..2 {
            for y in 0..2 {
                // Rows 1..=2 are A_x, rows 3..=4 are B_y in every level.
                objective += sym_unit(n, 1 + x, 3 + y) * functional.c[x][y];
            }
        }
        let sdp = SdpProblem::new(objective, constraints)?;
        Ok(Self {
            level,
            words,
            classes,
            sdp,
        })
    }
}

#[derive(Debug, Clone)]
pub struct NpaResult {
    pub level: NpaLevel,
    pub value: f64,
    pub sdp: SdpResult,
}

pub fn npa_bound(level: NpaLevel, functional: &CorrelationFunctional) -> Result<f64> {
    Ok(npa_bound_with(level, functional, &Tolerances::default())?.value)
}

/// Maximum of the functional over moment matrices at the given level.
pub fn npa_bound_with(level: NpaLevel, functional: &CorrelationFunctional, tol: &Tolerances) -> Result<NpaResult> {
    let prog = MomentProgram::build(level, functional)?;
    let sdp = sdp_solve_with(&prog.sdp, tol)?;
    Ok(NpaResult {
        level,
        value: sdp.value,
        sdp,
    })
}
