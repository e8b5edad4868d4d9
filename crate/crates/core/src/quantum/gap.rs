//! Classical / quantum / no-signaling bounds on one functional, side by side.

use serde::{Deserialize, Serialize};

use crate::causal::{ace_bounds_with, manski_from_table};
use crate::config::Tolerances;
use crate::error::Result;
use crate::model::{behavior_to_correlations, chsh_variant_values, Behavior, ChshVariant, CorrelationFunctional, Interval, ObservedIVTable};
use crate::par;
use crate::polytope::{local_max, no_signaling_max};

use super::npa::{npa_bound_with, NpaLevel};

pub const UNIMPLEMENTED_QUANTUM_IV: &str = "unimplemented_quantum_iv";

#[derive(Debug, Clone)]
pub enum GapInput {
    Functional(CorrelationFunctional),
    /// Evaluated on the CHSH variant it violates most.
    Behavior(Behavior),
    Table(ObservedIVTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub lp_pivots: usize,
    pub sdp_iterations: usize,
    pub sdp_duality_gap: f64,
    pub sdp_min_eigenvalue: f64,
    pub sdp_primal_infeasibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellGap {
    pub functional: CorrelationFunctional,
    pub level: NpaLevel,
    pub classical: f64,
    pub quantum: f64,
    pub nosignaling: f64,
    /// `quantum − classical`.
    pub gap: f64,
    /// Value attained by the input behavior, when one was given.
    pub observed: Option<f64>,
    pub variant: Option<ChshVariant>,
    pub trace: SolverTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvGap {
    /// Sharp ACE interval over classical response-type models.
    pub classical: Interval,
    /// No quantum construction for the IV graph; always `None`.
    pub quantum: Option<Interval>,
    /// Manski bounds on the instrument-pooled data.
    pub nosignaling: Interval,
    /// Width removed by the instrument relative to the pooled bounds.
    pub gap: f64,
    pub warnings: Vec<String>,
    pub lp_pivots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "input", rename_all = "snake_case")]
pub enum GapReport {
    Bell(BellGap),
    Iv(IvGap),
}

pub fn bell_gap(f: &CorrelationFunctional, level: NpaLevel, tol: &Tolerances) -> Result<BellGap> {
    let cl = local_max(f, tol)?;
    let ns = no_signaling_max(f, tol)?;
    let q = npa_bound_with(level, f, tol)?;
    Ok(BellGap {
        functional: *f,
        level,
        classical: cl.value,
        quantum: q.value,
        nosignaling: ns.value,
        gap: q.value - cl.value,
        observed: None,
        variant: None,
        trace: SolverTrace {
            lp_pivots: cl.pivots + ns.pivots,
            sdp_iterations: q.sdp.iterations,
            sdp_duality_gap: q.sdp.duality_gap,
            sdp_min_eigenvalue: q.sdp.min_eigenvalue,
            sdp_primal_infeasibility: q.sdp.primal_infeasibility,
        },
    })
}

pub fn iv_gap(t: &ObservedIVTable, tol: &Tolerances) -> Result<IvGap> {
    let ace = ace_bounds_with(t, tol)?;
    let manski = manski_from_table(t);
    Ok(IvGap {
        classical: ace.interval,
        quantum: None,
        nosignaling: manski,
        gap: manski.width() - ace.interval.width(),
        warnings: vec![UNIMPLEMENTED_QUANTUM_IV.to_string()],
        lp_pivots: ace.pivots,
    })
}

pub fn quantum_gap_report(input: &GapInput, level: NpaLevel, tol: &Tolerances) -> Result<GapReport> {
    match input {
        GapInput::Functional(f) => Ok(GapReport::Bell(bell_gap(f, level, tol)?)),
        GapInput::Behavior(b) => {
            let e = behavior_to_correlations(b);
            let (variant, value) = chsh_variant_values(&e)
                .into_iter()
                .fold((None::<ChshVariant>, f64::NEG_INFINITY), |(bv, bs), (v, s)| {
                    if s > bs {
                        (Some(v), s)
                    } else {
                        (bv, bs)
                    }
                });
            let variant = variant.expect("eight variants");
            let mut g = bell_gap(&variant.functional(), level, tol)?;
            g.observed = Some(value);
            g.variant = Some(variant);
            Ok(GapReport::Bell(g))
        }
        GapInput::Table(t) => Ok(GapReport::Iv(iv_gap(t, tol)?)),
    }
}

/// The second axis used for planar slices: `E00 − E01 + E10 + E11`.
pub fn chsh_prime() -> CorrelationFunctional {
    CorrelationFunctional::new([[1.0, -1.0], [1.0, 1.0]])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionSample {
    pub angle: f64,
    pub classical: f64,
    pub quantum: f64,
    pub nosignaling: f64,
}

/// Support values of the three sets along `cos t·S + sin t·S'`, for `samples`
/// evenly spaced angles in `[0, 2π)`.
pub fn cross_section(samples: usize, level: NpaLevel, tol: &Tolerances) -> Result<Vec<CrossSectionSample>> {
    let s = CorrelationFunctional::chsh();
    let sp = chsh_prime();
    par::map_range(samples, |k| {
        let t = std::f64::consts::TAU * k as f64 / samples as f64;
        let (c, si) = (t.cos(), t.sin());
        let mut coef = [[0.0; 2]; 2];
        for x in 0..2 {
            for y in 0..2 {
                coef[x][y] = c * s.c[x][y] + si * sp.c[x][y];
            }
        }
        let g = bell_gap(&CorrelationFunctional::new(coef), level, tol)?;
        Ok(CrossSectionSample {
            angle: t,
            classical: g.classical,
            quantum: g.quantum,
            nosignaling: g.nosignaling,
        })
    })
    .into_iter()
    .collect()
}
