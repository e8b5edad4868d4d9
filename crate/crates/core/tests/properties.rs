use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polybound::causal::{ace_bounds, forward_simulate, instrumental_inequality, manski_from_table, pns_bounds, pns_lp_bounds, FormulaVariant};
use polybound::entropic::{entropic_chsh, entropy_vector_from_joint, shannon_cone_check, uniform_settings};
use polybound::model::{behavior_to_correlations, chsh_value, chsh_variant_values, Behavior, CorrelationFunctional};
use polybound::opt::{lp_solve, min_eigenvalue, sdp_solve, LpProblem, LpStatus, SdpConstraint, SdpProblem, Sense};
use polybound::polytope::{enumerate_strategies, fine_check, local_max, local_membership, no_signaling_max};
use polybound::quantum::{npa_bound, quantum_behavior, NpaLevel};
use polybound::sample;
use polybound::Tolerances;

const TSIRELSON: f64 = 2.0 * std::f64::consts::SQRT_2;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn max_variant(b: &Behavior) -> f64 {
    chsh_variant_values(&behavior_to_correlations(b))
        .iter()
        .map(|(_, s)| *s)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// A bounded, feasible standard-form LP: `b = A x0` for some `x0 ≥ 0`, plus a budget row.
fn random_lp(r: &mut ChaCha8Rng, m: usize, n: usize) -> LpProblem {
    let mut a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
    a.push(vec![1.0; n]);
    let x0: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..1.0)).collect();
    let b = a.iter().map(|row| row.iter().zip(&x0).map(|(u, v)| u * v).sum()).collect();
    let c = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
    LpProblem::new(c, a, b, Sense::Max).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn correlations_are_linear(seed in any::<u64>(), w in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let b1 = sample::no_signaling_behavior(&mut r, 0.5);
        let b2 = sample::no_signaling_behavior(&mut r, 0.5);
        let mixed = behavior_to_correlations(&b1.mix(&b2, w).unwrap());
        let (e1, e2) = (behavior_to_correlations(&b1), behavior_to_correlations(&b2));
        for x in 0..2 {
            for y in 0..2 {
                prop_assert!((mixed.get(x, y) - (w * e1.get(x, y) + (1.0 - w) * e2.get(x, y))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn chsh_ranges(seed in any::<u64>()) {
        let mut r = rng(seed);
        let ns = sample::no_signaling_behavior(&mut r, 0.3);
        let s = chsh_value(&behavior_to_correlations(&ns));
        prop_assert!((-4.0 - 1e-12..=4.0 + 1e-12).contains(&s));
        let local = sample::local_behavior(&mut r, 0.3);
        for (_, v) in chsh_variant_values(&behavior_to_correlations(&local)) {
            prop_assert!(v.abs() <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn lp_value_ignores_column_order(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_lp(&mut r, 3, 6);
        let base = lp_solve(&p).unwrap();
        prop_assert_eq!(base.status, LpStatus::Optimal);
        let mut perm: Vec<usize> = (0..6).collect();
        for i in (1..6).rev() {
            perm.swap(i, r.gen_range(0..=i));
        }
        let q = LpProblem::new(
            perm.iter().map(|&j| p.objective[j]).collect(),
            p.a.iter().map(|row| perm.iter().map(|&j| row[j]).collect()).collect(),
            p.b.clone(),
            Sense::Max,
        ).unwrap();
        let permuted = lp_solve(&q).unwrap();
        prop_assert!((base.value - permuted.value).abs() <= 1e-9);
    }

    #[test]
    fn lp_weak_duality(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_lp(&mut r, 3, 7);
        let s = lp_solve(&p).unwrap();
        prop_assert_eq!(s.status, LpStatus::Optimal);
        let dual_value: f64 = s.dual.iter().zip(&p.b).map(|(y, b)| y * b).sum();
        prop_assert!(s.value <= dual_value + 1e-6);
        // Dual feasibility for a max problem: Aᵀy ≥ c.
        for j in 0..p.cols() {
            let col: f64 = (0..p.rows()).map(|i| p.a[i][j] * s.dual[i]).sum();
            prop_assert!(col >= p.objective[j] - 1e-9);
        }
        prop_assert!(p.residual(&s.solution) <= 1e-9);
    }

    #[test]
    fn sdp_primal_is_psd(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = 4;
        let c = DMatrix::from_fn(n, n, |_, _| r.gen_range(-1.0..1.0));
        let c = (&c + c.transpose()) * 0.5;
        let cons = (0..n)
            .map(|i| {
                let mut a = DMatrix::zeros(n, n);
                a[(i, i)] = 1.0;
                SdpConstraint { a, b: 1.0 }
            })
            .collect();
        let s = sdp_solve(&SdpProblem::new(c, cons).unwrap()).unwrap();
        prop_assert!(min_eigenvalue(&s.primal) >= -1e-7);
        prop_assert!(s.duality_gap <= 1e-6);
        prop_assert!(s.value <= s.dual_value + 1e-6);
    }

    #[test]
    fn membership_is_convex(seed in any::<u64>(), w in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let b1 = sample::local_behavior(&mut r, 0.5);
        let b2 = sample::local_behavior(&mut r, 0.5);
        prop_assert!(local_membership(&b1).unwrap().is_member());
        prop_assert!(local_membership(&b1.mix(&b2, w).unwrap()).unwrap().is_member());
    }

    #[test]
    fn fine_on_noisy_pr_and_quantum(seed in any::<u64>(), v in 0.0f64..=1.0) {
        let mut r = rng(seed);
        prop_assert!(fine_check(&sample::noisy_pr_box(v)).unwrap().agrees());
        let q = quantum_behavior(&sample::two_qubit_state(&mut r), &sample::measurements(&mut r)).unwrap();
        prop_assert!(fine_check(&q).unwrap().agrees());
    }

    #[test]
    fn quantum_behaviors_respect_tsirelson(seed in any::<u64>()) {
        let mut r = rng(seed);
        let q = quantum_behavior(&sample::two_qubit_state(&mut r), &sample::measurements(&mut r)).unwrap();
        prop_assert!(q.is_no_signaling());
        let best = max_variant(&q);
        prop_assert!(best <= TSIRELSON + 1e-9);
        let bound = npa_bound(NpaLevel::L1, &CorrelationFunctional::chsh()).unwrap();
        prop_assert!(best <= bound + 1e-6);
    }

    #[test]
    fn simulated_tables_are_informative(seed in any::<u64>(), alpha in 0.1f64..3.0) {
        let mut r = rng(seed);
        let (_, t) = sample::iv_table(&mut r, alpha);
        prop_assert!(instrumental_inequality(&t, FormulaVariant::Standard).holds);
        let ace = ace_bounds(&t).unwrap();
        prop_assert!(ace.lo >= -1.0 - 1e-12 && ace.hi <= 1.0 + 1e-12);
        prop_assert!(ace.width() < 1.0);
        let manski = manski_from_table(&t);
        prop_assert!((manski.width() - 1.0).abs() <= 1e-12);
        prop_assert!(ace.is_within(&manski, 1e-9));
    }

    #[test]
    fn pns_formula_is_sharp(seed in any::<u64>(), alpha in 0.2f64..3.0) {
        let mut r = rng(seed);
        let (_, exp, obs) = sample::pns_instance(&mut r, alpha);
        let cf = pns_bounds(&exp, &obs, FormulaVariant::Standard).unwrap();
        let lp = pns_lp_bounds(&exp, &obs, &Tolerances::default()).unwrap();
        prop_assert!((cf.lo - lp.lo).abs() <= 1e-9 && (cf.hi - lp.hi).abs() <= 1e-9);
        // The three-term upper bound is never tighter than the sharp one.
        let lit = pns_bounds(&exp, &obs, FormulaVariant::PaperLiteral).unwrap();
        prop_assert!(lit.hi >= lp.hi - 1e-9);
    }

    #[test]
    fn shannon_cone_is_sound(seed in any::<u64>(), n in 1usize..=4) {
        let mut r = rng(seed);
        let arities: Vec<usize> = (0..n).map(|_| r.gen_range(2..=3)).collect();
        let size: usize = arities.iter().product();
        let joint = sample::dirichlet(&mut r, size, 0.5);
        let h = entropy_vector_from_joint(&arities, &joint).unwrap();
        prop_assert!(shannon_cone_check(&h, 1e-12).member);
    }

    #[test]
    fn entropic_lhs_ignores_outcome_relabeling(seed in any::<u64>()) {
        let mut r = rng(seed);
        let b = sample::no_signaling_behavior(&mut r, 0.5);
        let p = b.as_array();
        let mut flipped = [[[[0.0; 2]; 2]; 2]; 2];
        for a in 0..2 {
            for bb in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        flipped[1 - a][bb][x][y] = p[a][bb][x][y];
                    }
                }
            }
        }
        let s = uniform_settings();
        let l1 = entropic_chsh(&b, &s).unwrap().lhs;
        let l2 = entropic_chsh(&Behavior::new(flipped).unwrap(), &s).unwrap().lhs;
        prop_assert!((l1 - l2).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bounds_nest_on_random_functionals(c in prop::array::uniform4(-1.0f64..1.0)) {
        let f = CorrelationFunctional::new([[c[0], c[1]], [c[2], c[3]]]);
        let tol = Tolerances::default();
        let cl = local_max(&f, &tol).unwrap().value;
        let q1 = npa_bound(NpaLevel::L1, &f).unwrap();
        let q2 = npa_bound(NpaLevel::L1AB, &f).unwrap();
        let ns = no_signaling_max(&f, &tol).unwrap().value;
        prop_assert!(cl <= q2 + 1e-6);
        prop_assert!(q2 <= q1 + 1e-6);
        prop_assert!(q1 <= ns + 1e-6);
    }
}

#[test]
fn every_variant_facet_is_two() {
    for v in CorrelationFunctional::chsh_variants() {
        let f = v.functional();
        let best = enumerate_strategies()
            .iter()
            .map(|s| f.evaluate(&s.correlations()))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best, 2.0);
    }
}

#[test]
fn forward_simulation_reproduces_response_mass() {
    let mut r = rng(11);
    for _ in 0..50 {
        let q = sample::response_type_dist(&mut r, 1.0);
        let t = forward_simulate(&q);
        let total: f64 = t.as_array().iter().flatten().flatten().sum();
        assert_abs_diff_eq!(total, 2.0, epsilon = 1e-12);
    }
}
