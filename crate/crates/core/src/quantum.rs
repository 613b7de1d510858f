//! Two-qubit realizations of tuples via the Born rule,
//! `P_{x,y}(a,b) = <psi| M_{x,a} (x) N_{y,b} |psi>`.
//!
//! Linear algebra is done on fixed-size 2x2 operators and 4-vectors. The
//! two-qubit basis is ordered `|00>, |01>, |10>, |11>` with Alice's qubit
//! first, and `|0> = |+>`, `|1> = |->` in the labels used for the reference
//! model.

use num_complex::Complex64 as C;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{BellScenario, DistributionTuple, THETA_SUBSTITUTION};

pub type Op2 = [[C; 2]; 2];
pub type Ket2 = [C; 2];
pub type Ket4 = [C; 4];

const MODEL_TOL: f64 = 1e-12;

fn zero() -> C {
    C::new(0.0, 0.0)
}

pub fn identity2() -> Op2 {
    [[C::new(1.0, 0.0), zero()], [zero(), C::new(1.0, 0.0)]]
}

/// `|v><v|`.
pub fn projector(v: Ket2) -> Op2 {
    let mut out = [[zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = v[i] * v[j].conj();
        }
    }
    out
}

pub fn complement(op: &Op2) -> Op2 {
    let id = identity2();
    let mut out = [[zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = id[i][j] - op[i][j];
        }
    }
    out
}

/// Eigenvalues of a Hermitian 2x2 operator, ascending.
pub fn hermitian_eigenvalues(op: &Op2) -> (f64, f64) {
    let (a, d) = (op[0][0].re, op[1][1].re);
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + op[0][1].norm_sqr()).sqrt();
    (mean - radius, mean + radius)
}

fn hermiticity_defect(op: &Op2) -> f64 {
    [(0, 0), (0, 1), (1, 1)].iter().map(|&(i, j)| (op[i][j] - op[j][i].conj()).norm()).fold(0.0, f64::max)
}

/// `<psi| M (x) N |psi>`, real part.
pub fn expectation(psi: &Ket4, m: &Op2, n: &Op2) -> f64 {
    let mut acc = zero();
    for i in 0..2 {
        for j in 0..2 {
            let bra = psi[2 * i + j].conj();
            for k in 0..2 {
                for l in 0..2 {
                    acc += bra * m[i][k] * n[j][l] * psi[2 * k + l];
                }
            }
        }
    }
    acc.re
}

/// Largest `|| sum_o ops[o] - I ||` (entrywise max) over inputs.
pub fn completeness_defect(ops: &[Vec<Op2>]) -> f64 {
    let id = identity2();
    ops.iter()
        .map(|family| {
            let mut worst = 0.0f64;
            for i in 0..2 {
                for j in 0..2 {
                    let s: C = family.iter().map(|op| op[i][j]).sum();
                    worst = worst.max((s - id[i][j]).norm());
                }
            }
            worst
        })
        .fold(0.0, f64::max)
}

fn check_family(name: &str, ops: &[Vec<Op2>], outputs: usize) -> Result<()> {
    if ops.is_empty() {
        return Err(Error::InvalidModel(format!("{name} has no inputs")));
    }
    for (x, family) in ops.iter().enumerate() {
        if family.len() != outputs {
            return Err(Error::InvalidModel(format!(
                "{name}[{x}] has {} operators for {outputs} outputs",
                family.len()
            )));
        }
        for op in family {
            if hermiticity_defect(op) > MODEL_TOL {
                return Err(Error::InvalidModel(format!("{name}[{x}] has a non-Hermitian operator")));
            }
            let (lo, hi) = hermitian_eigenvalues(op);
            if lo < -MODEL_TOL || hi > 1.0 + MODEL_TOL {
                return Err(Error::InvalidModel(format!(
                    "{name}[{x}] operator eigenvalues ({lo:.3e}, {hi:.3e}) outside [0,1]"
                )));
            }
        }
    }
    let defect = completeness_defect(ops);
    if defect > MODEL_TOL {
        return Err(Error::InvalidModel(format!("{name} completeness defect {defect:.3e}")));
    }
    Ok(())
}

/// Pure two-qubit state with local measurements, indexed
/// `alice_ops[x][a]`, `bob_ops[y][b]` by output position.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitModel {
    scenario: BellScenario,
    psi: Ket4,
    alice_ops: Vec<Vec<Op2>>,
    bob_ops: Vec<Vec<Op2>>,
}

impl TwoQubitModel {
    pub fn new(
        outputs_a: Vec<i64>,
        outputs_b: Vec<i64>,
        psi: Ket4,
        alice_ops: Vec<Vec<Op2>>,
        bob_ops: Vec<Vec<Op2>>,
    ) -> Result<Self> {
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > MODEL_TOL {
            return Err(Error::InvalidModel(format!("state norm {norm} is not 1")));
        }
        let scenario = BellScenario::new(alice_ops.len().max(1), bob_ops.len().max(1), outputs_a, outputs_b)?;
        check_family("alice_ops", &alice_ops, scenario.ka())?;
        check_family("bob_ops", &bob_ops, scenario.kb())?;
        Ok(Self { scenario, psi, alice_ops, bob_ops })
    }

    pub fn scenario(&self) -> &BellScenario {
        &self.scenario
    }

    pub fn psi(&self) -> &Ket4 {
        &self.psi
    }

    pub fn alice_ops(&self) -> &[Vec<Op2>] {
        &self.alice_ops
    }

    pub fn bob_ops(&self) -> &[Vec<Op2>] {
        &self.bob_ops
    }

    pub fn born_tuple(&self) -> DistributionTuple {
        DistributionTuple::from_fn(self.scenario.clone(), |x, y, a, b| {
            expectation(&self.psi, &self.alice_ops[x][a], &self.bob_ops[y][b])
        })
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            outputs_a: self.scenario.outputs_a().to_vec(),
            outputs_b: self.scenario.outputs_b().to_vec(),
            psi: self.psi.iter().map(|c| [c.re, c.im]).collect(),
            alice_ops: ops_to_file(&self.alice_ops),
            bob_ops: ops_to_file(&self.bob_ops),
        }
    }
}

/// Mixed state given as an ensemble of pure states sharing one set of
/// measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    components: Vec<(f64, TwoQubitModel)>,
}

impl EnsembleModel {
    pub fn new(measurements: &TwoQubitModel, states: Vec<(f64, Ket4)>) -> Result<Self> {
        let total: f64 = states.iter().map(|(w, _)| w).sum();
        if states.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > MODEL_TOL {
            return Err(Error::InvalidModel("ensemble weights must be a distribution".into()));
        }
        let components = states
            .into_iter()
            .map(|(w, psi)| {
                let mut m = measurements.clone();
                let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
                if (norm - 1.0).abs() > MODEL_TOL {
                    return Err(Error::InvalidModel(format!("ensemble state norm {norm} is not 1")));
                }
                m.psi = psi;
                Ok((w, m))
            })
            .collect::<Result<_>>()?;
        Ok(Self { components })
    }

    pub fn born_tuple(&self) -> DistributionTuple {
        let scenario = self.components[0].1.scenario.clone();
        let mut acc = vec![0.0; scenario.len()];
        for (w, model) in &self.components {
            for (o, v) in acc.iter_mut().zip(model.born_tuple().as_slice()) {
                *o += w * v;
            }
        }
        DistributionTuple::from_flat(scenario, acc).expect("shape fixed by the scenario")
    }
}

/// JSON form; complex numbers are `[re, im]` pairs, operators are
/// `[input][output][row][col]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub outputs_a: Vec<i64>,
    pub outputs_b: Vec<i64>,
    pub psi: Vec<[f64; 2]>,
    pub alice_ops: Vec<Vec<[[[f64; 2]; 2]; 2]>>,
    pub bob_ops: Vec<Vec<[[[f64; 2]; 2]; 2]>>,
}

fn ops_to_file(ops: &[Vec<Op2>]) -> Vec<Vec<[[[f64; 2]; 2]; 2]>> {
    ops.iter().map(|family| family.iter().map(|op| op.map(|row| row.map(|c| [c.re, c.im]))).collect()).collect()
}

fn ops_from_file(ops: &[Vec<[[[f64; 2]; 2]; 2]>]) -> Vec<Vec<Op2>> {
    ops.iter()
        .map(|family| family.iter().map(|op| op.map(|row| row.map(|[re, im]| C::new(re, im)))).collect())
        .collect()
}

impl ModelFile {
    pub fn into_model(self) -> Result<TwoQubitModel> {
        let psi: Ket4 = self
            .psi
            .iter()
            .map(|&[re, im]| C::new(re, im))
            .collect::<Vec<_>>()
            .try_into()
            .map_err(|_| Error::InvalidModel("psi must have 4 amplitudes".into()))?;
        TwoQubitModel::new(
            self.outputs_a,
            self.outputs_b,
            psi,
            ops_from_file(&self.alice_ops),
            ops_from_file(&self.bob_ops),
        )
    }
}

/// Binary measurement: `+1` outcome is `|v><v|`, `-1` its complement.
/// Output positions follow the `[-1, +1]` alphabet order.
fn binary_measurement(v: Ket2) -> Vec<Op2> {
    let plus = projector(v);
    vec![complement(&plus), plus]
}

/// Reference model for the one-parameter family: maximally entangled
/// `(|++> + |-->)/sqrt 2`, Alice's `+1` projectors on
/// `cos(t/2)|+> +- sin(t/2)|->` and `(|+> + i|->)/sqrt 2`, Bob's on `|+>` and
/// `(|+> + |->)/sqrt 2`. With `primed`, Alice's input `x` uses the vector of
/// input `z(x)` from [`THETA_SUBSTITUTION`].
pub fn make_paper_model(theta: f64, primed: bool) -> TwoQubitModel {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let phi = theta / 2.0;
    let re = |v: f64| C::new(v, 0.0);
    let alice_vectors: [Ket2; 3] =
        [[re(phi.cos()), re(phi.sin())], [re(phi.cos()), re(-phi.sin())], [re(s), C::new(0.0, s)]];
    let bob_vectors: [Ket2; 2] = [[re(1.0), re(0.0)], [re(s), re(s)]];
    let psi: Ket4 = [re(s), zero(), zero(), re(s)];
    let alice_ops = (0..3)
        .map(|x| {
            let source = if primed { THETA_SUBSTITUTION[x] } else { x };
            binary_measurement(alice_vectors[source])
        })
        .collect();
    let bob_ops = bob_vectors.iter().map(|&v| binary_measurement(v)).collect();
    TwoQubitModel::new(vec![-1, 1], vec![-1, 1], psi, alice_ops, bob_ops).expect("reference model is valid")
}

pub fn random_ket4<R: Rng + ?Sized>(rng: &mut R) -> Ket4 {
    let mut v = [zero(); 4];
    for c in v.iter_mut() {
        *c = C::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
    }
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    v.map(|c| c / norm)
}

/// Projector `(I + n . sigma)/2` for a uniformly random Bloch direction.
pub fn random_qubit_projector<R: Rng + ?Sized>(rng: &mut R) -> Op2 {
    let mut n: [f64; 3] = [StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)];
    let norm = n.iter().map(|v| v * v).sum::<f64>().sqrt();
    n.iter_mut().for_each(|v| *v /= norm);
    [
        [C::new(0.5 * (1.0 + n[2]), 0.0), C::new(0.5 * n[0], -0.5 * n[1])],
        [C::new(0.5 * n[0], 0.5 * n[1]), C::new(0.5 * (1.0 - n[2]), 0.0)],
    ]
}

/// Random pure state with random projective `+-1` measurements.
pub fn random_projective_model<R: Rng + ?Sized>(rng: &mut R, m: usize, n: usize) -> Result<TwoQubitModel> {
    let psi = random_ket4(rng);
    let family = |rng: &mut R| {
        let plus = random_qubit_projector(rng);
        vec![complement(&plus), plus]
    };
    let alice_ops = (0..m).map(|_| family(rng)).collect();
    let bob_ops = (0..n).map(|_| family(rng)).collect();
    TwoQubitModel::new(vec![-1, 1], vec![-1, 1], psi, alice_ops, bob_ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monotones::BellFunctional;
    use crate::scenario::{make_theta_family, make_theta_family_primed};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    #[test]
    fn half_identity_measurements_give_uniform() {
        let half = {
            let mut h = identity2();
            h[0][0] *= 0.5;
            h[1][1] *= 0.5;
            h
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = TwoQubitModel::new(
            vec![-1, 1],
            vec![-1, 1],
            random_ket4(&mut rng),
            vec![vec![half, half]; 2],
            vec![vec![half, half]; 2],
        )
        .unwrap();
        let u = DistributionTuple::uniform(BellScenario::chsh());
        assert!(model.born_tuple().max_abs_diff(&u).unwrap() < 1e-15);
    }

    #[test]
    fn reference_model_matches_formulas() {
        for i in 0..25 {
            let theta = -1.0 + 0.17 * i as f64;
            let p = make_paper_model(theta, false).born_tuple();
            assert!(p.max_abs_diff(&make_theta_family(theta, true)).unwrap() < 1e-12);
            let q = make_paper_model(theta, true).born_tuple();
            assert!(q.max_abs_diff(&make_theta_family_primed(theta)).unwrap() < 1e-12);
            assert!((p.get(2, 0, 1, 0) - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn theta_zero_duplicates_alice_inputs() {
        let p = make_paper_model(0.0, false).born_tuple();
        for y in 0..2 {
            assert_eq!(p.block(0, y), p.block(1, y));
        }
    }

    #[test]
    fn chsh_of_reference_model() {
        let p = make_paper_model(0.6, false).born_tuple().restrict(&[0, 1], &[0, 1]).unwrap();
        let s = BellFunctional::standard_chsh().value(&p).unwrap();
        assert!((s - 2.0 * SQRT_2 * (0.6 - FRAC_PI_4).cos()).abs() < 1e-12);
    }

    #[test]
    fn invalid_models_are_rejected() {
        let model = make_paper_model(0.3, false);
        let mut ops = model.alice_ops().to_vec();
        ops[0][0] = identity2();
        let err = TwoQubitModel::new(vec![-1, 1], vec![-1, 1], *model.psi(), ops, model.bob_ops().to_vec());
        assert!(matches!(err, Err(Error::InvalidModel(_))));
        let mut psi = *model.psi();
        psi[0] = C::new(1.0, 0.0);
        let err =
            TwoQubitModel::new(vec![-1, 1], vec![-1, 1], psi, model.alice_ops().to_vec(), model.bob_ops().to_vec());
        assert!(matches!(err, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn random_models_are_no_signaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let model = random_projective_model(&mut rng, 2, 3).unwrap();
            let report = model.born_tuple().validate(1e-13);
            assert!(report.is_valid(), "{report:?}");
        }
    }

    #[test]
    fn ensemble_mixes_linearly() {
        let base = make_paper_model(0.4, false);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let other = random_ket4(&mut rng);
        let ens = EnsembleModel::new(&base, vec![(0.3, *base.psi()), (0.7, other)]).unwrap();
        let mut second = base.clone();
        second.psi = other;
        let expected = base.born_tuple().mix(&second.born_tuple(), 0.3).unwrap();
        assert!(ens.born_tuple().max_abs_diff(&expected).unwrap() < 1e-15);
    }

    #[test]
    fn model_json_roundtrip() {
        let model = make_paper_model(0.8, true);
        let text = serde_json::to_string(&model.to_file()).unwrap();
        let back: ModelFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.into_model().unwrap(), model);
        let raw: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(raw["alice_ops"][2][1][1][0].as_array().unwrap().len(), 2);
    }
}
