//! Two-qubit simulation, moment-matrix relaxations and the quantum-gap report.

pub mod gap;
pub mod npa;
pub mod sim;

pub use gap::{bell_gap, cross_section, iv_gap, quantum_gap_report, BellGap, CrossSectionSample, GapInput, GapReport, IvGap};
pub use npa::{npa_bound, npa_bound_with, MomentProgram, NpaLevel, NpaResult};
pub use sim::{
    noncommutativity_witness, quantum_behavior, quantum_correlations, tsirelson_behavior, DichotomicObservable, Measurements,
    NoncommutativityWitness, TwoQubitState,
};
