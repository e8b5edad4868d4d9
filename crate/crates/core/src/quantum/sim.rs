//! Exact two-qubit states and ±1-valued observables.

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sign, Behavior, CorrelationTable};

pub type C = Complex64;

const fn c(re: f64, im: f64) -> C {
    Complex64::new(re, im)
}

pub fn pauli_x() -> Matrix2<C> {
    Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))
}

pub fn pauli_y() -> Matrix2<C> {
    Matrix2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0))
}

pub fn pauli_z() -> Matrix2<C> {
    Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0))
}

pub fn kron(a: &Matrix2<C>, b: &Matrix2<C>) -> Matrix4<C> {
    Matrix4::from_fn(|i, j| a[(i / 2, j / 2)] * b[(i % 2, j % 2)])
}

pub fn commutator(a: &Matrix2<C>, b: &Matrix2<C>) -> Matrix2<C> {
    a * b - b * a
}

/// Operator norm via the largest eigenvalue of `M†M`.
pub fn op_norm2(m: &Matrix2<C>) -> f64 {
    (m.adjoint() * m).symmetric_eigenvalues().max().max(0.0).sqrt()
}

fn hermitian_defect2(m: &Matrix2<C>) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn hermitian_defect4(m: &Matrix4<C>) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Density matrix of two qubits, basis order `|00⟩, |01⟩, |10⟩, |11⟩` (Alice first).
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    rho: Matrix4<C>,
}

impl TwoQubitState {
    pub fn new(rho: Matrix4<C>) -> Result<Self> {
        if hermitian_defect4(&rho) > 1e-12 {
            return Err(Error::NonHermitian("density matrix"));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let lmin = rho.symmetric_eigenvalues().min();
        if lmin < -1e-10 {
            return Err(Error::InvalidState(format!("negative eigenvalue {lmin:e}")));
        }
        Ok(Self { rho })
    }

    pub fn pure(psi: [C; 4]) -> Result<Self> {
        let v = Vector4::from(psi);
        let n = v.norm();
        if n == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let v = v / C::from(n);
        Self::new(v * v.adjoint())
    }

    /// `(|01⟩ − |10⟩)/√2`.
    pub fn singlet() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::pure([c(0.0, 0.0), c(h, 0.0), c(-h, 0.0), c(0.0, 0.0)]).expect("valid")
    }

    /// `(|00⟩ + |11⟩)/√2`.
    pub fn phi_plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::pure([c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)]).expect("valid")
    }

    pub fn product_zero() -> Self {
        Self::pure([c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).expect("valid")
    }

    pub fn maximally_mixed() -> Self {
        Self {
            rho: Matrix4::identity() * c(0.25, 0.0),
        }
    }

    /// `w·self + (1 − w)·other`.
    pub fn mix(&self, other: &TwoQubitState, w: f64) -> Result<Self> {
        Self::new(self.rho * c(w, 0.0) + other.rho * c(1.0 - w, 0.0))
    }

    pub fn rho(&self) -> &Matrix4<C> {
        &self.rho
    }

    /// `Re tr(ρ M)`.
    pub fn expectation(&self, m: &Matrix4<C>) -> f64 {
        (self.rho * m).trace().re
    }
}

/// Hermitian 2×2 observable with eigenvalues ±1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DichotomicObservable {
    m: Matrix2<C>,
}

impl DichotomicObservable {
    pub fn new(m: Matrix2<C>) -> Result<Self> {
        if hermitian_defect2(&m) > 1e-12 {
            return Err(Error::NonHermitian("observable"));
        }
        let sq = m * m - Matrix2::identity();
        if sq.iter().map(|z| z.norm()).fold(0.0, f64::max) > 1e-10 {
            return Err(Error::InvalidObservable("observable does not square to the identity".into()));
        }
        Ok(Self { m })
    }

    /// `cos θ·Z + sin θ·X`.
    pub fn from_angle(theta: f64) -> Self {
        Self {
            m: pauli_z() * c(theta.cos(), 0.0) + pauli_x() * c(theta.sin(), 0.0),
        }
    }

    /// `n·σ` for a non-zero Bloch vector, normalized.
    pub fn from_bloch(n: [f64; 3]) -> Result<Self> {
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if !(len > 0.0) {
            return Err(Error::InvalidObservable("zero Bloch vector".into()));
        }
        let [x, y, z] = n.map(|v| c(v / len, 0.0));
        Ok(Self {
            m: pauli_x() * x + pauli_y() * y + pauli_z() * z,
        })
    }

    pub fn matrix(&self) -> &Matrix2<C> {
        &self.m
    }

    /// Eigenprojector `(I ± O)/2` for outcome bit 0 (`+1`) or 1 (`−1`).
    pub fn projector(&self, outcome: usize) -> Matrix2<C> {
        (Matrix2::identity() + self.m * c(sign(outcome), 0.0)) * c(0.5, 0.0)
    }
}

/// Alice's pair `(A0, A1)` and Bob's pair `(B0, B1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurements {
    pub a: [DichotomicObservable; 2],
    pub b: [DichotomicObservable; 2],
}

impl Measurements {
    pub fn new(a0: DichotomicObservable, a1: DichotomicObservable, b0: DichotomicObservable, b1: DichotomicObservable) -> Self {
        Self { a: [a0, a1], b: [b0, b1] }
    }

    pub fn from_angles(alice: [f64; 2], bob: [f64; 2]) -> Self {
        Self {
            a: alice.map(DichotomicObservable::from_angle),
            b: bob.map(DichotomicObservable::from_angle),
        }
    }
}

/// `p(a,b|x,y) = tr(ρ · Π_a^{A_x} ⊗ Π_b^{B_y})`.
pub fn quantum_behavior(rho: &TwoQubitState, m: &Measurements) -> Result<Behavior> {
    let mut p = [[[[0.0; 2]; 2]; 2]; 2];
    for x in 0..2 {
        for y in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    let proj = kron(&m.a[x].projector(a), &m.b[y].projector(b));
                    p[a][b][x][y] = rho.expectation(&proj).max(0.0);
                }
            }
        }
    }
    Behavior::renormalize(p)
}

/// `E[A_x B_y] = tr(ρ A_x ⊗ B_y)` directly from the observables.
pub fn quantum_correlations(rho: &TwoQubitState, m: &Measurements) -> CorrelationTable {
    let mut e = [[0.0; 2]; 2];
    for (x, row) in e.iter_mut().enumerate() {
        for (y, v) in row.iter_mut().enumerate() {
            *v = rho.expectation(&kron(m.a[x].matrix(), m.b[y].matrix())).clamp(-1.0, 1.0);
        }
    }
    CorrelationTable::new(e).expect("clamped")
}

/// `A0⊗B0 + A0⊗B1 + A1⊗B0 − A1⊗B1`.
pub fn chsh_operator(m: &Measurements) -> Matrix4<C> {
    let [a0, a1] = m.a.map(|o| *o.matrix());
    let [b0, b1] = m.b.map(|o| *o.matrix());
    kron(&a0, &(b0 + b1)) + kron(&a1, &(b0 - b1))
}

/// Singlet-type optimum: `|Φ+⟩` with Alice at angles {0, π/2} and Bob at {π/4, −π/4}.
pub fn tsirelson_behavior() -> Behavior {
    use std::f64::consts::FRAC_PI_4;
    let m = Measurements::from_angles([0.0, 2.0 * FRAC_PI_4], [FRAC_PI_4, -FRAC_PI_4]);
    quantum_behavior(&TwoQubitState::phi_plus(), &m).expect("valid state")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoncommutativityWitness {
    /// `‖[A0, A1]‖`.
    pub comm_a: f64,
    /// `‖[B0, B1]‖`.
    pub comm_b: f64,
    /// Largest eigenvalue of the CHSH operator: the best value over all states.
    pub achievable_chsh: f64,
}

pub fn noncommutativity_witness(m: &Measurements) -> NoncommutativityWitness {
    NoncommutativityWitness {
        comm_a: op_norm2(&commutator(m.a[0].matrix(), m.a[1].matrix())),
        comm_b: op_norm2(&commutator(m.b[0].matrix(), m.b[1].matrix())),
        achievable_chsh: chsh_operator(m).symmetric_eigenvalues().max(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{behavior_to_correlations, chsh_value};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    #[test]
    fn product_state_is_deterministic() {
        let z = DichotomicObservable::from_angle(0.0);
        let m = Measurements::new(z, z, z, z);
        let b = quantum_behavior(&TwoQubitState::product_zero(), &m).unwrap();
        assert_abs_diff_eq!(b.prob(0, 0, 1, 1), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(chsh_value(&behavior_to_correlations(&b)), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn singlet_optimal_angles() {
        let m = Measurements::from_angles([0.0, FRAC_PI_2], [FRAC_PI_4, -FRAC_PI_4]);
        let b = quantum_behavior(&TwoQubitState::singlet(), &m).unwrap();
        let e = behavior_to_correlations(&b);
        let h = SQRT_2 / 2.0;
        for (x, y, want) in [(0, 0, -h), (0, 1, -h), (1, 0, -h), (1, 1, h)] {
            assert_abs_diff_eq!(e.get(x, y), want, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(-chsh_value(&e), 2.0 * SQRT_2, epsilon = 1e-12);
        assert!(b.is_no_signaling());
    }

    #[test]
    fn tsirelson_behavior_correlations() {
        let e = behavior_to_correlations(&tsirelson_behavior());
        let h = SQRT_2 / 2.0;
        assert_abs_diff_eq!(e.get(0, 0), h, epsilon = 1e-12);
        assert_abs_diff_eq!(e.get(1, 1), -h, epsilon = 1e-12);
    }

    #[test]
    fn maximally_mixed_has_no_correlations() {
        let m = Measurements::from_angles([0.3, 1.1], [-0.7, 2.0]);
        let e = quantum_correlations(&TwoQubitState::maximally_mixed(), &m);
        for v in e.as_array().iter().flatten() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn witness_examples() {
        let z = DichotomicObservable::from_angle(0.0);
        let x = DichotomicObservable::from_angle(FRAC_PI_2);
        let w = noncommutativity_witness(&Measurements::new(z, z, z, x));
        assert_eq!(w.comm_a, 0.0);
        assert!(w.achievable_chsh <= 2.0 + 1e-12);

        let w = noncommutativity_witness(&Measurements::new(z, x, z, x));
        assert_abs_diff_eq!(w.comm_a, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.comm_b, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.achievable_chsh, 2.0 * SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn observable_validation() {
        let mut m = pauli_x();
        m[(0, 1)] = c(0.0, 1.0);
        assert_eq!(DichotomicObservable::new(m), Err(Error::NonHermitian("observable")));
        assert!(DichotomicObservable::new(pauli_z() * c(0.5, 0.0)).is_err());
        assert!(DichotomicObservable::new(pauli_y()).is_ok());
        assert!(DichotomicObservable::from_bloch([0.0; 3]).is_err());
    }

    #[test]
    fn state_validation() {
        let mut rho = *TwoQubitState::maximally_mixed().rho();
        rho[(0, 0)] = c(0.5, 0.0);
        assert!(TwoQubitState::new(rho).is_err());
        let mut rho = *TwoQubitState::maximally_mixed().rho();
        rho[(0, 1)] = c(0.1, 0.0);
        assert_eq!(TwoQubitState::new(rho), Err(Error::NonHermitian("density matrix")));
        let mut rho = Matrix4::zeros();
        rho[(0, 0)] = c(1.5, 0.0);
        rho[(1, 1)] = c(-0.5, 0.0);
        assert!(TwoQubitState::new(rho).is_err());
    }
}
