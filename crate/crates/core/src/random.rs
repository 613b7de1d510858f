//! Random tuples for property checks and probes.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::Result;
use crate::local_polytope::{vertex_count, DeterministicVertex};
use crate::scenario::{BellScenario, DistributionTuple};

/// Random convex mixture of `support` uniformly chosen vertices with
/// flat-Dirichlet weights.
pub fn local_tuple<R: Rng + ?Sized>(s: &BellScenario, rng: &mut R, support: usize) -> Result<DistributionTuple> {
    let support = support.max(1);
    let raw: Vec<f64> = (0..support).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    let mut acc = vec![0.0; s.len()];
    for w in raw {
        let v = random_vertex(s, rng)?;
        for x in 0..s.m() {
            for y in 0..s.n() {
                acc[s.index(x, y, v.a_assign[x], v.b_assign[y])] += w / total;
            }
        }
    }
    DistributionTuple::from_flat(s.clone(), acc)
}

pub fn random_vertex<R: Rng + ?Sized>(s: &BellScenario, rng: &mut R) -> Result<DeterministicVertex> {
    debug_assert!(vertex_count(s) > 0);
    let a = (0..s.m()).map(|_| rng.random_range(0..s.ka())).collect();
    let b = (0..s.n()).map(|_| rng.random_range(0..s.kb())).collect();
    DeterministicVertex::new(s.clone(), a, b)
}

/// Uniform sample from the 2x2 binary no-signaling polytope, parametrized by
/// marginals and correlators `p(a,b) = (1 + a<A_x> + b<B_y> + ab<A_xB_y>)/4`
/// and drawn by rejection.
pub fn no_signaling_chsh<R: Rng + ?Sized>(rng: &mut R) -> DistributionTuple {
    let s = BellScenario::chsh();
    let outs = s.outputs_a().to_vec();
    loop {
        let ma: [f64; 2] = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
        let mb: [f64; 2] = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
        let c: [[f64; 2]; 2] = [
            [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)],
            [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)],
        ];
        let p = DistributionTuple::from_fn(s.clone(), |x, y, a, b| {
            let (va, vb) = (outs[a] as f64, outs[b] as f64);
            (1.0 + va * ma[x] + vb * mb[y] + va * vb * c[x][y]) / 4.0
        });
        if p.as_slice().iter().all(|&v| v >= 0.0) {
            return p;
        }
    }
}

/// Mixture of one of the eight PR-type extremal boxes with a random local
/// tuple; covers the nonlocal region far better than uniform sampling.
pub fn pr_mixture<R: Rng + ?Sized>(rng: &mut R) -> Result<DistributionTuple> {
    let s = BellScenario::chsh();
    let outs = s.outputs_a().to_vec();
    let minus: (usize, usize) = (rng.random_range(0..2), rng.random_range(0..2));
    let flip: i64 = if rng.random::<bool>() { 1 } else { -1 };
    let pr = DistributionTuple::from_fn(s.clone(), |x, y, a, b| {
        let sign = if (x, y) == minus { -flip } else { flip };
        if outs[a] * outs[b] == sign {
            0.5
        } else {
            0.0
        }
    });
    let local = local_tuple(&s, rng, 3)?;
    pr.mix(&local, rng.random())
}
