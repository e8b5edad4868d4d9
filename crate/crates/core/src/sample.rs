//! Random instance generators for tests, benches and the audit mode.

use nalgebra::Matrix4;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::causal::{forward_simulate, ExperimentalData, ObservationalData};
use crate::model::{Behavior, CorrelationTriple, ObservedIVTable, ResponseTypeDist};
use crate::polytope::enumerate_strategies;
use crate::quantum::{DichotomicObservable, Measurements, TwoQubitState};

/// A point of the `(n − 1)`-simplex with symmetric concentration `alpha`.
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, n: usize, alpha: f64) -> Vec<f64> {
    let g = Gamma::new(alpha, 1.0).expect("positive concentration");
    loop {
        let v: Vec<f64> = (0..n).map(|_| g.sample(rng)).collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            return v.into_iter().map(|x| x / s).collect();
        }
    }
}

fn array16(v: &[f64]) -> [f64; 16] {
    std::array::from_fn(|k| v[k])
}

pub fn response_type_dist<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> ResponseTypeDist {
    ResponseTypeDist::new(array16(&dirichlet(rng, 16, alpha))).expect("simplex point")
}

/// An observed table generated by a random response-type population.
pub fn iv_table<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> (ResponseTypeDist, ObservedIVTable) {
    let q = response_type_dist(rng, alpha);
    (q, forward_simulate(&q))
}

pub fn local_behavior<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> Behavior {
    let w = dirichlet(rng, 16, alpha);
    let parts: Vec<(f64, Behavior)> = enumerate_strategies().iter().zip(w).map(|(s, w)| (w, s.behavior())).collect();
    Behavior::mixture(&parts).expect("convex combination of strategies")
}

/// The PR-type vertex `a ⊕ b = xy ⊕ αx ⊕ βy ⊕ γ`; `k = 4α + 2β + γ`.
pub fn pr_vertex(k: usize) -> Behavior {
    let (al, be, ga) = (k >> 2 & 1, k >> 1 & 1, k & 1);
    let mut p = [[[[0.0; 2]; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for x in 0..2 {
                for y in 0..2 {
                    if a ^ b == (x & y) ^ (al & x) ^ (be & y) ^ ga {
                        p[a][b][x][y] = 0.5;
                    }
                }
            }
        }
    }
    Behavior::new(p).expect("PR vertex")
}

/// A random point of the no-signaling polytope: a mixture of its 24 vertices.
/// Small `alpha` concentrates weight on few vertices, giving both local and
/// nonlocal samples.
pub fn no_signaling_behavior<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> Behavior {
    let w = dirichlet(rng, 24, alpha);
    let mut parts: Vec<(f64, Behavior)> = enumerate_strategies().iter().zip(&w).map(|(s, &w)| (w, s.behavior())).collect();
    parts.extend((0..8).map(|k| (w[16 + k], pr_vertex(k))));
    Behavior::mixture(&parts).expect("convex combination of vertices")
}

/// `v·PR + (1 − v)·uniform`.
pub fn noisy_pr_box(v: f64) -> Behavior {
    Behavior::pr_box().mix(&Behavior::uniform(), v).expect("visibility in [0, 1]")
}

/// Three correlators drawn uniformly from `[−1, 1]³`.
pub fn correlation_triple<R: Rng + ?Sized>(rng: &mut R) -> CorrelationTriple {
    CorrelationTriple::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))
        .expect("entries in range")
}

/// PNS data read off a random joint of `(Y0, Y1, X)`; atom index `4·y0 + 2·y1 + x`.
pub fn pns_instance<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> ([f64; 8], ExperimentalData, ObservationalData) {
    let q: [f64; 8] = {
        let v = dirichlet(rng, 8, alpha);
        std::array::from_fn(|k| v[k])
    };
    let mut p_y1 = 0.0;
    let mut p_y0 = 0.0;
    let mut obs = [[0.0; 2]; 2];
    for (k, w) in q.iter().enumerate() {
        let (y0, y1, x) = (k >> 2 & 1, k >> 1 & 1, k & 1);
        p_y1 += w * y1 as f64;
        p_y0 += w * y0 as f64;
        let y = if x == 1 { y1 } else { y0 };
        obs[x][y] += w;
    }
    let exp = ExperimentalData::new(p_y1.min(1.0), p_y0.min(1.0)).expect("probabilities");
    let obs = ObservationalData::new(obs).expect("joint of a distribution");
    (q, exp, obs)
}

pub fn observable<R: Rng + ?Sized>(rng: &mut R) -> DichotomicObservable {
    loop {
        let n: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        if let Ok(o) = DichotomicObservable::from_bloch(n) {
            return o;
        }
    }
}

pub fn measurements<R: Rng + ?Sized>(rng: &mut R) -> Measurements {
    Measurements::new(observable(rng), observable(rng), observable(rng), observable(rng))
}

/// `G G† / tr(G G†)` for a complex Gaussian `G`.
pub fn two_qubit_state<R: Rng + ?Sized>(rng: &mut R) -> TwoQubitState {
    let g = Matrix4::from_fn(|_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let m = g * g.adjoint();
    let tr = m.trace();
    let rho = m / tr;
    // Symmetrize away rounding before validation.
    let rho = (rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    TwoQubitState::new(rho).expect("Wishart sample is a state")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::pns_lp_bounds;
    use crate::config::Tolerances;
    use crate::model::{behavior_to_correlations, chsh_value};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pr_vertices_are_no_signaling() {
        for k in 0..8 {
            let b = pr_vertex(k);
            assert!(b.is_no_signaling());
        }
        assert_eq!(pr_vertex(0), Behavior::pr_box());
        assert!((chsh_value(&behavior_to_correlations(&pr_vertex(0))) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn generators_produce_valid_objects() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            assert!(no_signaling_behavior(&mut rng, 0.3).is_no_signaling());
            assert!(local_behavior(&mut rng, 1.0).is_no_signaling());
            let (_, exp, obs) = pns_instance(&mut rng, 1.0);
            assert!(pns_lp_bounds(&exp, &obs, &Tolerances::default()).is_ok());
            let _ = two_qubit_state(&mut rng);
            let _ = measurements(&mut rng);
        }
    }
}
