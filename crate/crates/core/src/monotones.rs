//! Nonlocality measures: generic Bell functionals and the CHSH monotone
//! `N(P) = max{0, max_nu |sum_{x,y} nu(x,y) <A_x B_y>| - 2}`, where `nu`
//! ranges over the four sign patterns on `{0,1}^2` with exactly one `-1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::random;
use crate::scenario::{BellScenario, DistributionTuple};
use crate::transforms::{apply_wiring, wiring_count, Wiring, DEFAULT_WIRING_CAP};

/// Largest CHSH value over local tuples.
pub const CHSH_LOCAL_BOUND: f64 = 2.0;

/// Largest value of `N` over quantum tuples, `2 sqrt 2 - 2`.
pub const CHSH_QUANTUM_MAX_N: f64 = 2.0 * std::f64::consts::SQRT_2 - 2.0;

/// Linear functional `sum beta_{x,y,a,b} P_{x,y}(a,b) - offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellFunctional {
    pub scenario: BellScenario,
    /// Flat coefficients in tuple layout.
    pub coefficients: Vec<f64>,
    pub offset: f64,
}

impl BellFunctional {
    pub fn new(scenario: BellScenario, coefficients: Vec<f64>, offset: f64) -> Result<Self> {
        if coefficients.len() != scenario.len() {
            return Err(Error::DimensionMismatch(format!(
                "functional has {} coefficients, scenario needs {}",
                coefficients.len(),
                scenario.len()
            )));
        }
        if !offset.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("functional coefficients must be finite".into()));
        }
        Ok(Self { scenario, coefficients, offset })
    }

    pub fn zero(scenario: BellScenario, offset: f64) -> Self {
        let coefficients = vec![0.0; scenario.len()];
        Self { scenario, coefficients, offset }
    }

    /// `beta_{x,y,a,b} = nu(x,y) a b` on the 2x2 binary scenario.
    pub fn chsh(nu: NuMap) -> Self {
        let scenario = BellScenario::chsh();
        let outs = scenario.outputs_a().to_vec();
        let coefficients =
            DistributionTuple::from_fn(scenario.clone(), |x, y, a, b| (nu.sign(x, y) * outs[a] * outs[b]) as f64)
                .into_vec();
        Self { scenario, coefficients, offset: 0.0 }
    }

    /// The usual CHSH expression `S` with the minus sign on inputs (1,1).
    pub fn standard_chsh() -> Self {
        Self::chsh(NuMap::STANDARD)
    }

    pub fn value(&self, p: &DistributionTuple) -> Result<f64> {
        bell_value(p, self)
    }

    /// Coefficients reshaped `[x][y][a][b]`.
    pub fn nested(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        DistributionTuple::from_flat(self.scenario.clone(), self.coefficients.clone())
            .expect("shape checked at construction")
            .nested()
    }
}

pub fn bell_value(p: &DistributionTuple, f: &BellFunctional) -> Result<f64> {
    if p.scenario().len() != f.coefficients.len() || p.scenario() != &f.scenario {
        return Err(Error::DimensionMismatch("functional and tuple scenarios differ".into()));
    }
    let s: f64 = f.coefficients.iter().zip(p.as_slice()).map(|(c, v)| c * v).sum();
    Ok(s - f.offset)
}

/// Sign pattern `nu: {0,1}^2 -> {-1,+1}` taking `-1` at exactly one pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NuMap {
    minus: (usize, usize),
}

impl NuMap {
    pub const STANDARD: NuMap = NuMap { minus: (1, 1) };

    /// All four maps, ordered by the position of the `-1`.
    pub const ALL: [NuMap; 4] =
        [NuMap { minus: (0, 0) }, NuMap { minus: (0, 1) }, NuMap { minus: (1, 0) }, NuMap { minus: (1, 1) }];

    pub fn with_minus_at(x: usize, y: usize) -> Result<Self> {
        if x > 1 || y > 1 {
            return Err(Error::InvalidArgument(format!("nu position ({x},{y}) outside {{0,1}}^2")));
        }
        Ok(Self { minus: (x, y) })
    }

    /// Parses a 2x2 sign table; exactly one entry must be `-1`.
    pub fn from_table(table: [[i64; 2]; 2]) -> Result<Self> {
        let mut minus = None;
        for (x, row) in table.iter().enumerate() {
            for (y, &v) in row.iter().enumerate() {
                match v {
                    1 => {}
                    -1 if minus.is_none() => minus = Some((x, y)),
                    -1 => return Err(Error::InvalidArgument("nu takes -1 more than once".into())),
                    other => return Err(Error::InvalidArgument(format!("nu entry {other} not in {{-1,+1}}"))),
                }
            }
        }
        minus.map(|minus| Self { minus }).ok_or_else(|| Error::InvalidArgument("nu must take -1 exactly once".into()))
    }

    pub fn minus_at(&self) -> (usize, usize) {
        self.minus
    }

    pub fn sign(&self, x: usize, y: usize) -> i64 {
        if (x, y) == self.minus {
            -1
        } else {
            1
        }
    }

    pub fn table(&self) -> [[i64; 2]; 2] {
        [[self.sign(0, 0), self.sign(0, 1)], [self.sign(1, 0), self.sign(1, 1)]]
    }
}

fn correlators_2x2(p: &DistributionTuple) -> Result<[[f64; 2]; 2]> {
    p.scenario().require_chsh()?;
    let mut c = [[0.0; 2]; 2];
    for (x, row) in c.iter_mut().enumerate() {
        for (y, v) in row.iter_mut().enumerate() {
            *v = p.correlator(x, y)?;
        }
    }
    Ok(c)
}

/// `sum_{x,y} nu(x,y) <A_x B_y>`.
pub fn chsh_expression(p: &DistributionTuple, nu: NuMap) -> Result<f64> {
    let c = correlators_2x2(p)?;
    Ok((0..2).flat_map(|x| (0..2).map(move |y| (x, y))).map(|(x, y)| nu.sign(x, y) as f64 * c[x][y]).sum())
}

/// Best CHSH variant: `max_nu |sum nu <A_x B_y>|` and the maximizing map
/// (first in [`NuMap::ALL`] order on ties).
pub fn best_chsh(p: &DistributionTuple) -> Result<(f64, NuMap)> {
    let c = correlators_2x2(p)?;
    let mut best = (f64::NEG_INFINITY, NuMap::ALL[0]);
    for nu in NuMap::ALL {
        let s: f64 = (0..2)
            .flat_map(|x| (0..2).map(move |y| (x, y)))
            .map(|(x, y)| nu.sign(x, y) as f64 * c[x][y])
            .sum::<f64>()
            .abs();
        if s > best.0 {
            best = (s, nu);
        }
    }
    Ok(best)
}

/// The CHSH monotone; defined on 2x2 binary tuples only.
pub fn chsh_measure(p: &DistributionTuple) -> Result<f64> {
    let (s, _) = best_chsh(p)?;
    Ok((s - CHSH_LOCAL_BOUND).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// Single pair maximizing `|<A_x B_y>|`.
    MaxCorrelator,
    /// Pair of Alice inputs and pair of Bob inputs maximizing `N` of the
    /// 2x2 restriction.
    MaxChsh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSelection {
    pub strategy: SelectionStrategy,
    /// Selected Alice inputs (one for `MaxCorrelator`, two for `MaxChsh`).
    pub alice: Vec<usize>,
    pub bob: Vec<usize>,
    /// `|<A_xi B_zeta>|` or `N` of the restriction.
    pub score: f64,
    /// The tuple restricted to the selected inputs.
    pub restricted: DistributionTuple,
}

const TIE_EPS: f64 = 1e-12;

/// Picks inputs per `strategy`; ties go to the lexicographically first
/// candidate.
pub fn select_inputs(p: &DistributionTuple, strategy: SelectionStrategy) -> Result<InputSelection> {
    let s = p.scenario();
    s.require_pm1()?;
    match strategy {
        SelectionStrategy::MaxCorrelator => {
            let mut best = (0usize, 0usize, f64::NEG_INFINITY);
            for x in 0..s.m() {
                for y in 0..s.n() {
                    let c = p.correlator(x, y)?.abs();
                    if c > best.2 + TIE_EPS {
                        best = (x, y, c);
                    }
                }
            }
            let (x, y, score) = best;
            Ok(InputSelection { strategy, alice: vec![x], bob: vec![y], score, restricted: p.restrict(&[x], &[y])? })
        }
        SelectionStrategy::MaxChsh => {
            if s.m() < 2 || s.n() < 2 {
                return Err(Error::UnsupportedScenario("CHSH selection needs at least two inputs per party".into()));
            }
            let mut best: Option<(Vec<usize>, Vec<usize>, f64)> = None;
            for x0 in 0..s.m() {
                for x1 in x0 + 1..s.m() {
                    for y0 in 0..s.n() {
                        for y1 in y0 + 1..s.n() {
                            let sub = p.restrict(&[x0, x1], &[y0, y1])?;
                            let score = chsh_measure(&sub)?;
                            if best.as_ref().is_none_or(|b| score > b.2 + TIE_EPS) {
                                best = Some((vec![x0, x1], vec![y0, y1], score));
                            }
                        }
                    }
                }
            }
            let (alice, bob, score) = best.expect("at least one candidate");
            let restricted = p.restrict(&alice, &bob)?;
            Ok(InputSelection { strategy, alice, bob, score, restricted })
        }
    }
}

/// `N` for any binary scenario: direct on 2x2, otherwise via the best 2x2
/// restriction.
pub fn chsh_measure_any(p: &DistributionTuple) -> Result<f64> {
    if p.scenario().m() == 2 && p.scenario().n() == 2 {
        chsh_measure(p)
    } else {
        Ok(select_inputs(p, SelectionStrategy::MaxChsh)?.score)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeWitness {
    Wiring { trial: usize, wiring_index: u64, wiring: Wiring },
    Mixture { trial: usize, weight: f64, local: DistributionTuple },
}

/// Result of [`monotonicity_probe`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub trials: usize,
    pub seed: u64,
    pub baseline: f64,
    /// `max_T N(T(P)) - N(P)` over the sampled transformations.
    pub max_increase: f64,
    pub worst: Option<ProbeWitness>,
}

/// Samples random wirings (even trials) and random mixtures with local tuples
/// (odd trials) and reports the largest increase of `N`. Trial `i` draws
/// from ChaCha stream `i` of `seed`, so the report does not depend on thread
/// count.
pub fn monotonicity_probe(p: &DistributionTuple, trials: usize, seed: u64) -> Result<ProbeReport> {
    let baseline = chsh_measure(p)?;
    let total = wiring_count(p.scenario());
    if total > DEFAULT_WIRING_CAP {
        return Err(Error::CapExceeded { what: "wiring enumeration", count: total, cap: DEFAULT_WIRING_CAP });
    }
    let outcomes: Vec<(f64, ProbeWitness)> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<(f64, ProbeWitness)> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            if trial % 2 == 0 {
                let index = rng.random_range(0..total as u64);
                let wiring = Wiring::from_index(p.scenario(), index)?;
                let image = apply_wiring(p, &wiring)?;
                let delta = chsh_measure(&image)? - baseline;
                Ok((delta, ProbeWitness::Wiring { trial, wiring_index: index, wiring }))
            } else {
                let local = random::local_tuple(p.scenario(), &mut rng, 4)?;
                let weight: f64 = rng.random();
                let mixed = p.mix(&local, weight)?;
                let delta = chsh_measure(&mixed)? - baseline;
                Ok((delta, ProbeWitness::Mixture { trial, weight, local }))
            }
        })
        .collect::<Result<_>>()?;
    let mut max_increase = f64::NEG_INFINITY;
    let mut worst = None;
    for (delta, witness) in outcomes {
        if delta > max_increase {
            max_increase = delta;
            worst = Some(witness);
        }
    }
    if trials == 0 {
        max_increase = 0.0;
    }
    Ok(ProbeReport { trials, seed, baseline, max_increase, worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_polytope::enumerate_vertices;
    use crate::scenario::make_theta_family;
    use crate::transforms::{apply_elementary, ElementaryMove, Party};
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    #[test]
    fn standard_chsh_on_theta_family() {
        for i in 0..=20 {
            let theta = i as f64 * 0.1;
            let p = make_theta_family(theta, false);
            let s = BellFunctional::standard_chsh().value(&p).unwrap();
            assert!((s - 2.0 * SQRT_2 * (theta - FRAC_PI_4).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_functional_gives_minus_offset() {
        let f = BellFunctional::zero(BellScenario::chsh(), 2.0);
        assert_eq!(f.value(&DistributionTuple::pr_box()).unwrap(), -2.0);
    }

    #[test]
    fn vertices_respect_local_bound() {
        let verts = enumerate_vertices(&BellScenario::chsh()).unwrap();
        let mut max = 0.0f64;
        for v in &verts {
            for nu in NuMap::ALL {
                let s = BellFunctional::chsh(nu).value(&v.tuple()).unwrap();
                assert_eq!(s.abs().fract(), 0.0);
                max = max.max(s.abs());
            }
        }
        assert_eq!(max, 2.0);
    }

    #[test]
    fn chsh_measure_examples() {
        let p = make_theta_family(FRAC_PI_4, false);
        assert!((chsh_measure(&p).unwrap() - CHSH_QUANTUM_MAX_N).abs() < 1e-12);
        assert_eq!(chsh_measure(&DistributionTuple::pr_box()).unwrap(), 2.0);
        assert_eq!(chsh_measure(&DistributionTuple::uniform(BellScenario::chsh())).unwrap(), 0.0);
        let err = chsh_measure(&make_theta_family(0.2, true)).unwrap_err();
        assert!(matches!(err, Error::UnsupportedScenario(_)));
    }

    #[test]
    fn nu_table_parsing() {
        assert_eq!(NuMap::from_table([[1, 1], [1, -1]]).unwrap(), NuMap::STANDARD);
        assert!(NuMap::from_table([[1, 1], [1, 1]]).is_err());
        assert!(NuMap::from_table([[-1, 1], [1, -1]]).is_err());
        assert!(NuMap::from_table([[0, 1], [1, -1]]).is_err());
    }

    #[test]
    fn select_inputs_on_extended_family() {
        let p = make_theta_family(0.3, true);
        let sel = select_inputs(&p, SelectionStrategy::MaxCorrelator).unwrap();
        assert!(sel.alice[0] < 2 && sel.bob[0] < 2);
        assert_eq!((sel.alice[0], sel.bob[0]), (0, 0));

        let p0 = make_theta_family(0.0, true);
        let sel = select_inputs(&p0, SelectionStrategy::MaxCorrelator).unwrap();
        assert_eq!((sel.alice[0], sel.bob[0]), (0, 0));
        assert_eq!(sel.score, 1.0);

        let u = DistributionTuple::uniform(BellScenario::binary(3, 2).unwrap());
        let sel = select_inputs(&u, SelectionStrategy::MaxCorrelator).unwrap();
        assert_eq!((sel.alice[0], sel.bob[0], sel.score), (0, 0, 0.0));

        let pi4 = make_theta_family(FRAC_PI_4, true);
        let sel = select_inputs(&pi4, SelectionStrategy::MaxChsh).unwrap();
        assert_eq!(sel.alice, vec![0, 1]);
        assert!((sel.score - CHSH_QUANTUM_MAX_N).abs() < 1e-12);
        assert_eq!(sel.restricted, make_theta_family(FRAC_PI_4, false));
    }

    #[test]
    fn substitution_kills_chsh() {
        let p = make_theta_family(FRAC_PI_4, false);
        let q = apply_elementary(&p, &ElementaryMove::InputSubstitution { party: Party::Alice, input: 1, source: 0 })
            .unwrap();
        assert_eq!(chsh_measure(&q).unwrap(), 0.0);
    }

    #[test]
    fn probe_on_pr_box_and_local() {
        let report = monotonicity_probe(&DistributionTuple::pr_box(), 400, 7).unwrap();
        assert!(report.max_increase <= 1e-12, "{report:?}");
        let u = DistributionTuple::uniform(BellScenario::chsh());
        let report = monotonicity_probe(&u, 200, 3).unwrap();
        assert!(report.max_increase <= 0.0);
        // determinism
        let again = monotonicity_probe(&DistributionTuple::pr_box(), 400, 7).unwrap();
        assert_eq!(again, monotonicity_probe(&DistributionTuple::pr_box(), 400, 7).unwrap());
    }
}
