//! Executes a normalized request against the core library.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use polybound::causal::{
    ace_bounds_with, ace_coefficients, ace_of, instrumental_inequality, iv_constraint_matrix, iv_observation_vector,
    manski_bounds, manski_from_table, pn_ps_point_bounds_with, pns_bounds, pns_lp_bounds, ExperimentalData, FormulaVariant,
    ObservationalData,
};
use polybound::entropic::{entropic_chsh_with, entropy_vector_from_joint_with, shannon_cone_check, EntropyVector};
use polybound::model::{
    behavior_to_correlations, chsh_value, chsh_variant_values, Behavior, CorrelationFunctional, CorrelationTable, Interval,
    ObservedIVTable,
};
use polybound::opt::{lp_solve_with, LpProblem, LpStatus, Sense};
use polybound::oracle::{oracle_extremal_scan, oracle_extremal_scan_vertices, AtomGrid, MomentConstraint};
use polybound::polytope::{
    enumerate_strategies, fine_check_with, frechet_bounds, local_max, local_membership_with, no_signaling_max,
};
use polybound::quantum::{cross_section, npa_bound_with, quantum_gap_report, GapInput, GapReport, NpaLevel};
use polybound::{par, sample, Error, Tolerances};

use crate::error::CliResult;
use crate::request::{BellData, EntropicData, GapData, Payload, Request};

pub const WARN_SIGNALING: &str = "signaling";
pub const WARN_PAPER_LITERAL: &str = "paper_literal_formula";
pub const WARN_AUDIT_DISAGREEMENT: &str = "audit_disagreement";

/// Oracle agreement thresholds for `--audit`.
const LP_ORACLE_TOL: f64 = 1e-9;
const SDP_ORACLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub results: Value,
    pub solver: Map<String, Value>,
    pub audit: Option<Value>,
    pub warnings: Vec<String>,
}

/// Tolerances in force: the configured set with the request's input tolerance
/// used for normalization checks.
pub fn effective_tolerances(req: &Request) -> Tolerances {
    Tolerances {
        normalization: req.settings.tolerance,
        ..req.settings.tolerances
    }
}

fn interval(i: &Interval) -> Value {
    json!({"lo": i.lo, "hi": i.hi, "width": i.width()})
}

fn functional(c: &[[f64; 2]; 2]) -> CorrelationFunctional {
    CorrelationFunctional::new(*c)
}

fn behavior(p: &crate::request::BehaviorTable, tol: &Tolerances, warnings: &mut Vec<String>) -> CliResult<Behavior> {
    let b = Behavior::with_tolerances(*p, tol)?;
    if !b.is_no_signaling() {
        warnings.push(WARN_SIGNALING.to_string());
    }
    Ok(b)
}

fn variant_note(v: FormulaVariant, warnings: &mut Vec<String>) {
    if v == FormulaVariant::PaperLiteral {
        warnings.push(WARN_PAPER_LITERAL.to_string());
    }
}

/// One oracle comparison; `discrepancy` is compared against `tolerance`.
fn check(name: &str, discrepancy: f64, tolerance: f64) -> Value {
    json!({"check": name, "discrepancy": discrepancy, "tolerance": tolerance, "agrees": discrepancy <= tolerance})
}

fn boolean_check(name: &str, agrees: bool) -> Value {
    json!({"check": name, "agrees": agrees})
}

fn audit_block(checks: Vec<Value>, warnings: &mut Vec<String>) -> Value {
    let agrees = checks.iter().all(|c| c["agrees"] == Value::Bool(true));
    if !agrees {
        warnings.push(WARN_AUDIT_DISAGREEMENT.to_string());
    }
    json!({"agrees": agrees, "checks": checks})
}

fn iv_scan_discrepancy(t: &ObservedIVTable, lp: &Interval) -> CliResult<f64> {
    let scan = oracle_extremal_scan(&ace_coefficients(), &iv_constraint_matrix(), &iv_observation_vector(t))?;
    Ok(match scan {
        Some(s) => (s.range.lo - lp.lo).abs().max((s.range.hi - lp.hi).abs()),
        None => f64::INFINITY,
    })
}

fn sandwich(f: &CorrelationFunctional, quantum: f64, tol: &Tolerances) -> CliResult<Vec<Value>> {
    let cl = local_max(f, tol)?.value;
    let ns = no_signaling_max(f, tol)?.value;
    Ok(vec![
        check("classical_below_quantum", (cl - quantum).max(0.0), SDP_ORACLE_TOL),
        check("quantum_below_nosignaling", (quantum - ns).max(0.0), SDP_ORACLE_TOL),
    ])
}

fn correlation_entries(f: &CorrelationFunctional) -> Vec<f64> {
    (0..16)
        .map(|k| {
            let (a, b, x, y) = (k >> 3 & 1, k >> 2 & 1, k >> 1 & 1, k & 1);
            f.c[x][y] * if a == b { 1.0 } else { -1.0 }
        })
        .collect()
}

fn vertex_scan_max(f: &CorrelationFunctional) -> CliResult<f64> {
    let vertices: Vec<Vec<f64>> = enumerate_strategies().iter().map(|s| s.behavior().to_vec()).collect();
    Ok(oracle_extremal_scan_vertices(&correlation_entries(f), &vertices)?.hi)
}

/// Min and max of `objective · w` over distributions `w` on the grid meeting `cons`.
fn grid_lp_range(grid: &AtomGrid, objective: Vec<f64>, cons: Vec<MomentConstraint>, tol: &Tolerances) -> CliResult<Option<Interval>> {
    let mut a = vec![vec![1.0; grid.len()]];
    let mut b = vec![1.0];
    for c in cons {
        a.push(c.coeffs);
        b.push(c.target);
    }
    let mut ends = [0.0; 2];
    for (slot, sense) in [Sense::Min, Sense::Max].into_iter().enumerate() {
        let r = lp_solve_with(&LpProblem::new(objective.clone(), a.clone(), b.clone(), sense)?, tol)?;
        if r.status != LpStatus::Optimal {
            return Ok(None);
        }
        ends[slot] = r.value;
    }
    Ok(Some(Interval::new(ends[0], ends[1].max(ends[0]))?))
}

fn interval_discrepancy(a: &Interval, b: Option<Interval>) -> f64 {
    b.map_or(f64::INFINITY, |b| (a.lo - b.lo).abs().max((a.hi - b.hi).abs()))
}

pub fn run(req: &Request) -> CliResult<Outcome> {
    let tol = effective_tolerances(req);
    let s = &req.settings;
    let mut out = Outcome::default();
    let w = &mut out.warnings;
    match &req.payload {
        Payload::IvBounds { table } => {
            let t = ObservedIVTable::with_tolerance(*table, s.tolerance)?;
            let inst = instrumental_inequality(&t, s.variant);
            variant_note(s.variant, w);
            let ace = ace_bounds_with(&t, &tol)?;
            out.results = json!({
                "ace": interval(&ace.interval),
                "manski": interval(&manski_from_table(&t)),
                "instrumental": inst,
                "argmin": ace.argmin,
                "argmax": ace.argmax,
            });
            out.solver.insert("lp_pivots".into(), json!(ace.pivots));
            out.solver.insert("lp_max_residual".into(), json!(ace.max_residual));
            if s.audit {
                let d = iv_scan_discrepancy(&t, &ace.interval)?;
                out.audit = Some(audit_block(vec![check("ace_lp_vs_basis_scan", d, LP_ORACLE_TOL)], w));
            }
        }
        Payload::Chsh(data) => {
            let (e, b) = match data {
                BellData::Correlations(c) => (CorrelationTable::new(*c)?, None),
                BellData::Behavior(p) => {
                    let b = behavior(p, &tol, w)?;
                    (behavior_to_correlations(&b), Some(b))
                }
            };
            let variants: Vec<Value> = chsh_variant_values(&e)
                .iter()
                .map(|(v, val)| json!({"label": v.label(), "value": val}))
                .collect();
            let max = chsh_variant_values(&e).iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
            let local = match &b {
                Some(b) => local_membership_with(b, &tol)?.is_member(),
                None => max <= 2.0 + tol.facet,
            };
            out.results = json!({
                "correlations": e.as_array(),
                "s": chsh_value(&e),
                "max_variant": max,
                "variants": variants,
                "local": local,
            });
            if s.audit {
                let probe = b.unwrap_or_else(|| Behavior::from_correlations(&e));
                let checks = if probe.is_no_signaling() {
                    let fc = fine_check_with(&probe, &tol)?;
                    vec![
                        boolean_check("joint_distribution_vs_chsh_family", fc.agrees()),
                        boolean_check("locality_matches_joint_distribution", fc.joint_exists == local),
                    ]
                } else {
                    Vec::new()
                };
                out.audit = Some(audit_block(checks, w));
            }
        }
        Payload::Membership { behavior: p } => {
            let b = behavior(p, &tol, w)?;
            let cert = local_membership_with(&b, &tol)?;
            out.results = json!({
                "local": cert.is_member(),
                "certificate": cert,
                "signaling_magnitude": b.signaling_magnitude(),
            });
            if s.audit {
                let checks = if b.is_no_signaling() {
                    let fc = fine_check_with(&b, &tol)?;
                    vec![boolean_check("membership_vs_joint_distribution", fc.joint_exists == cert.is_member())]
                } else {
                    Vec::new()
                };
                out.audit = Some(audit_block(checks, w));
            }
        }
        Payload::Npa { coefficients } => {
            let f = functional(coefficients);
            let r = npa_bound_with(s.npa_level, &f, &tol)?;
            out.results = json!({
                "functional": f,
                "level": s.npa_level,
                "value": r.value,
                "dual_value": r.sdp.dual_value,
            });
            sdp_trace(&mut out.solver, &r.sdp);
            if s.audit {
                let mut checks = sandwich(&f, r.value, &tol)?;
                let other = match s.npa_level {
                    NpaLevel::L1 => NpaLevel::L1AB,
                    NpaLevel::L1AB => NpaLevel::L1,
                };
                let o = npa_bound_with(other, &f, &tol)?.value;
                let (inner, outer) = if s.npa_level == NpaLevel::L1 { (o, r.value) } else { (r.value, o) };
                checks.push(check("level_1ab_below_level_1", (inner - outer).max(0.0), SDP_ORACLE_TOL));
                out.audit = Some(audit_block(checks, w));
            }
        }
        Payload::Gap(data) => {
            let (input, table) = match data {
                GapData::Coefficients(c) => (GapInput::Functional(functional(c)), None),
                GapData::Behavior(p) => (GapInput::Behavior(behavior(p, &tol, w)?), None),
                GapData::Table(t) => {
                    let t = ObservedIVTable::with_tolerance(*t, s.tolerance)?;
                    (GapInput::Table(t), Some(t))
                }
            };
            let report = quantum_gap_report(&input, s.npa_level, &tol)?;
            match &report {
                GapReport::Bell(g) => {
                    out.solver.insert("lp_pivots".into(), json!(g.trace.lp_pivots));
                    out.solver.insert("sdp_iterations".into(), json!(g.trace.sdp_iterations));
                    out.solver.insert("sdp_duality_gap".into(), json!(g.trace.sdp_duality_gap));
                    out.solver.insert("sdp_min_eigenvalue".into(), json!(g.trace.sdp_min_eigenvalue));
                    out.solver.insert("sdp_primal_infeasibility".into(), json!(g.trace.sdp_primal_infeasibility));
                    if s.audit {
                        out.audit = Some(audit_block(sandwich(&g.functional, g.quantum, &tol)?, w));
                    }
                }
                GapReport::Iv(g) => {
                    w.extend(g.warnings.iter().cloned());
                    out.solver.insert("lp_pivots".into(), json!(g.lp_pivots));
                    if s.audit {
                        let t = table.as_ref().expect("iv gap comes from a table");
                        let d = iv_scan_discrepancy(t, &g.classical)?;
                        out.audit = Some(audit_block(vec![check("ace_lp_vs_basis_scan", d, LP_ORACLE_TOL)], w));
                    }
                }
            }
            let mut v = serde_json::to_value(&report).expect("gap report serializes");
            if let Some(m) = v.as_object_mut() {
                m.remove("trace");
                m.remove("warnings");
                m.remove("lp_pivots");
            }
            out.results = v;
        }
        Payload::Pns {
            p_yx,
            p_yxp,
            observational,
        } => {
            let exp = ExperimentalData::new(*p_yx, *p_yxp)?;
            let obs = ObservationalData::with_tolerance(*observational, s.tolerance)?;
            variant_note(s.variant, w);
            let pns = pns_bounds(&exp, &obs, s.variant)?;
            let pn_ps = match pn_ps_point_bounds_with(&exp, &obs, &tol) {
                Ok(b) => json!({"pn": interval(&b.pn), "ps": interval(&b.ps)}),
                Err(Error::ZeroProbability(event)) => {
                    w.push(format!("pn_ps_undefined: P({event}) = 0"));
                    Value::Null
                }
                Err(e) => return Err(e.into()),
            };
            out.results = json!({"pns": interval(&pns), "pn_ps": pn_ps, "variant": s.variant});
            if s.audit {
                let lp = pns_lp_bounds(&exp, &obs, &tol)?;
                let d = interval_discrepancy(&pns, Some(lp));
                out.audit = Some(audit_block(vec![check("pns_formula_vs_lp", d, LP_ORACLE_TOL)], w));
            }
        }
        Payload::Manski { e1, e0, px1 } => {
            let m = manski_bounds(*e1, *e0, *px1)?;
            out.results = json!({"ate": interval(&m)});
            if s.audit {
                // Atoms (Y0, Y1, X); only the factual arm of each unit is pinned.
                let g = AtomGrid::binary(3)?;
                let px0 = 1.0 - px1;
                let cons = vec![
                    MomentConstraint::event(&g, &[(2, 1), (1, 1)], e1 * px1),
                    MomentConstraint::event(&g, &[(2, 1), (1, 0)], (1.0 - e1) * px1),
                    MomentConstraint::event(&g, &[(2, 0), (0, 1)], e0 * px0),
                    MomentConstraint::event(&g, &[(2, 0), (0, 0)], (1.0 - e0) * px0),
                ];
                let obj = (0..g.len()).map(|k| g.bit(k, 1) as f64 - g.bit(k, 0) as f64).collect();
                let lp = grid_lp_range(&g, obj, cons, &tol)?;
                out.audit = Some(audit_block(vec![check("manski_vs_lp", interval_discrepancy(&m, lp), LP_ORACLE_TOL)], w));
            }
        }
        Payload::Frechet { u, v } => {
            let f = frechet_bounds(*u, *v)?;
            out.results = json!({"joint": interval(&f)});
            if s.audit {
                let g = AtomGrid::binary(2)?;
                let cons = vec![
                    MomentConstraint::event(&g, &[(0, 1)], *u),
                    MomentConstraint::event(&g, &[(1, 1)], *v),
                ];
                let obj = (0..g.len()).map(|k| (g.bit(k, 0) & g.bit(k, 1)) as f64).collect();
                let lp = grid_lp_range(&g, obj, cons, &tol)?;
                out.audit = Some(audit_block(vec![check("frechet_vs_lp", interval_discrepancy(&f, lp), LP_ORACLE_TOL)], w));
            }
        }
        Payload::Entropic(EntropicData::Behavior { behavior: p, settings }) => {
            let b = behavior(p, &tol, w)?;
            let r = entropic_chsh_with(&b, settings, s.tolerance)?;
            // The inequality is evaluated exactly as printed; the right-hand side
            // reads "H(settings)" as the joint entropy of the settings distribution.
            w.push(WARN_PAPER_LITERAL.to_string());
            out.results = json!({
                "entropic_chsh": r,
                "rhs_definition": "2 * H(X, Y) of the settings distribution",
                "settings": settings,
            });
            if s.audit {
                // Local behaviors must satisfy the entropic inequality.
                let local = local_membership_with(&b, &tol)?.is_member();
                out.audit = Some(audit_block(vec![boolean_check("local_implies_entropic", !local || r.holds)], w));
            }
        }
        Payload::Entropic(EntropicData::Vector { n, h }) => {
            let v = EntropyVector::new(*n, h)?;
            let c = shannon_cone_check(&v, tol.inequality);
            out.results = json!({"shannon": c, "entropy_vector": {"n": n, "h": v.values()}});
            if s.audit {
                out.audit = Some(audit_block(Vec::new(), w));
            }
        }
        Payload::Entropic(EntropicData::Joint { arities, p }) => {
            let v = entropy_vector_from_joint_with(arities, p, s.tolerance)?;
            let c = shannon_cone_check(&v, tol.inequality);
            if s.audit {
                // Entropies of an actual distribution always lie in the cone.
                out.audit = Some(audit_block(vec![boolean_check("realized_vector_in_cone", c.member)], w));
            }
            out.results = json!({"shannon": c, "entropy_vector": {"n": v.n(), "h": v.values()}});
        }
        Payload::Audit { samples, seed } => {
            variant_note(s.variant, w);
            let (results, agrees) = random_audit(*samples, *seed, s.npa_level, s.variant, &tol)?;
            if !agrees {
                w.push(WARN_AUDIT_DISAGREEMENT.to_string());
            }
            out.results = results;
        }
    }
    out.warnings.sort();
    out.warnings.dedup();
    Ok(out)
}

fn sdp_trace(m: &mut Map<String, Value>, r: &polybound::opt::SdpResult) {
    m.insert("sdp_iterations".into(), json!(r.iterations));
    m.insert("sdp_duality_gap".into(), json!(r.duality_gap));
    m.insert("sdp_min_eigenvalue".into(), json!(r.min_eigenvalue));
    m.insert("sdp_primal_infeasibility".into(), json!(r.primal_infeasibility));
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    instances: usize,
    failures: usize,
    max_discrepancy: f64,
}

impl Tally {
    fn record(&mut self, discrepancy: f64, tolerance: f64) {
        self.instances += 1;
        self.max_discrepancy = self.max_discrepancy.max(discrepancy);
        if discrepancy > tolerance {
            self.failures += 1;
        }
    }

    fn merge(mut self, o: Tally) -> Tally {
        self.instances += o.instances;
        self.failures += o.failures;
        self.max_discrepancy = self.max_discrepancy.max(o.max_discrepancy);
        self
    }
}

const AUDIT_CHECKS: [(&str, f64); 6] = [
    ("ace_lp_vs_basis_scan", LP_ORACLE_TOL),
    ("true_ace_inside_bounds", LP_ORACLE_TOL),
    ("pns_formula_vs_lp", LP_ORACLE_TOL),
    ("joint_distribution_vs_chsh_family", 0.0),
    ("local_lp_vs_vertex_scan", LP_ORACLE_TOL),
    ("classical_quantum_nosignaling_nesting", SDP_ORACLE_TOL),
];

fn audit_sample(i: usize, seed: u64, level: NpaLevel, variant: FormulaVariant, tol: &Tolerances) -> CliResult<[Tally; 6]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    let mut t = [Tally::default(); 6];

    let (q, table) = sample::iv_table(&mut rng, 1.0);
    let ace = ace_bounds_with(&table, tol)?.interval;
    t[0].record(iv_scan_discrepancy(&table, &ace)?, AUDIT_CHECKS[0].1);
    let truth = ace_of(&q);
    t[1].record((ace.lo - truth).max(truth - ace.hi).max(0.0), AUDIT_CHECKS[1].1);

    let (_, exp, obs) = sample::pns_instance(&mut rng, 1.0);
    let cf = pns_bounds(&exp, &obs, variant)?;
    t[2].record(interval_discrepancy(&cf, Some(pns_lp_bounds(&exp, &obs, tol)?)), AUDIT_CHECKS[2].1);

    let b = sample::no_signaling_behavior(&mut rng, 0.5);
    t[3].record(if fine_check_with(&b, tol)?.agrees() { 0.0 } else { 1.0 }, AUDIT_CHECKS[3].1);

    let f = CorrelationFunctional::new(std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))));
    let cl = local_max(&f, tol)?.value;
    t[4].record((cl - vertex_scan_max(&f)?).abs(), AUDIT_CHECKS[4].1);
    let qv = npa_bound_with(level, &f, tol)?.value;
    let ns = no_signaling_max(&f, tol)?.value;
    t[5].record((cl - qv).max(qv - ns).max(0.0), AUDIT_CHECKS[5].1);
    Ok(t)
}

/// Cross-checks every engine against its oracle on seeded random instances.
fn random_audit(samples: usize, seed: u64, level: NpaLevel, variant: FormulaVariant, tol: &Tolerances) -> CliResult<(Value, bool)> {
    let per: Vec<[Tally; 6]> = par::map_range(samples, |i| audit_sample(i, seed, level, variant, tol))
        .into_iter()
        .collect::<CliResult<_>>()?;
    let total = per
        .into_iter()
        .fold([Tally::default(); 6], |acc, t| std::array::from_fn(|k| acc[k].merge(t[k])));
    let mut checks = Vec::new();
    let mut agrees = true;
    for (k, (name, tolerance)) in AUDIT_CHECKS.iter().enumerate() {
        agrees &= total[k].failures == 0;
        checks.push(json!({
            "check": name,
            "instances": total[k].instances,
            "failures": total[k].failures,
            "max_discrepancy": total[k].max_discrepancy,
            "tolerance": tolerance,
        }));
    }
    Ok((json!({"samples": samples, "seed": seed, "level": level, "agrees": agrees, "checks": checks}), agrees))
}

/// `angle,classical,quantum,nosignaling` rows for the CHSH/CHSH' slice.
pub fn cross_section_csv(samples: usize, level: NpaLevel, tol: &Tolerances) -> CliResult<String> {
    let mut csv = String::from("angle,classical,quantum,nosignaling\n");
    for s in cross_section(samples, level, tol)? {
        csv.push_str(&format!("{:.12},{:.12},{:.12},{:.12}\n", s.angle, s.classical, s.quantum, s.nosignaling));
    }
    Ok(csv)
}
