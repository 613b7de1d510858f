//! Bell scenarios and distribution tuples.
//!
//! A tuple `P` stores `P_{x,y}(a,b)` as a flat row-major tensor with layout
//! `[x][y][a][b]`, where `a` and `b` are positions in the ordered output
//! alphabets. Tuples are immutable values; every transformation in the crate
//! returns a new tuple.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance used by validation and the LP-based decisions.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Two parties, `m` inputs for Alice and `n` for Bob, with ordered output
/// alphabets shared across inputs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BellScenario {
    m: usize,
    n: usize,
    outputs_a: Vec<i64>,
    outputs_b: Vec<i64>,
}

impl BellScenario {
    pub fn new(m: usize, n: usize, outputs_a: Vec<i64>, outputs_b: Vec<i64>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidArgument(format!("input counts must be at least 1 (got m={m}, n={n})")));
        }
        for (name, alphabet) in [("outputs_a", &outputs_a), ("outputs_b", &outputs_b)] {
            if alphabet.is_empty() {
                return Err(Error::InvalidArgument(format!("{name} is empty")));
            }
            let distinct: BTreeSet<_> = alphabet.iter().collect();
            if distinct.len() != alphabet.len() {
                return Err(Error::InvalidArgument(format!("{name} has duplicate symbols")));
            }
        }
        Ok(Self { m, n, outputs_a, outputs_b })
    }

    /// `m x n` scenario with both alphabets equal to `[-1, +1]`.
    pub fn binary(m: usize, n: usize) -> Result<Self> {
        Self::new(m, n, vec![-1, 1], vec![-1, 1])
    }

    /// The standard CHSH scenario.
    pub fn chsh() -> Self {
        Self::binary(2, 2).expect("2x2 binary scenario is valid")
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn outputs_a(&self) -> &[i64] {
        &self.outputs_a
    }

    pub fn outputs_b(&self) -> &[i64] {
        &self.outputs_b
    }

    pub fn ka(&self) -> usize {
        self.outputs_a.len()
    }

    pub fn kb(&self) -> usize {
        self.outputs_b.len()
    }

    /// Number of entries in a tuple tensor.
    pub fn len(&self) -> usize {
        self.m * self.n * self.ka() * self.kb()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        ((x * self.n + y) * self.ka() + a) * self.kb() + b
    }

    /// True when both alphabets are the set `{-1, +1}`, in any order.
    pub fn is_pm1(&self) -> bool {
        let pm1 = |v: &[i64]| v.len() == 2 && v.contains(&-1) && v.contains(&1);
        pm1(&self.outputs_a) && pm1(&self.outputs_b)
    }

    pub fn require_pm1(&self) -> Result<()> {
        if self.is_pm1() {
            Ok(())
        } else {
            Err(Error::UnsupportedScenario(format!(
                "alphabets must be {{-1,+1}}, got {:?} and {:?}",
                self.outputs_a, self.outputs_b
            )))
        }
    }

    pub fn require_chsh(&self) -> Result<()> {
        self.require_pm1()?;
        if self.m != 2 || self.n != 2 {
            return Err(Error::UnsupportedScenario(format!(
                "CHSH quantities need m=n=2, got m={}, n={}; select an input pair first",
                self.m, self.n
            )));
        }
        Ok(())
    }
}

/// Outcome of [`DistributionTuple::validate`]. Each check carries its worst
/// deviation so callers can judge how far off a failing tuple is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub nonnegative: bool,
    pub normalized: bool,
    pub no_signaling: bool,
    /// Largest amount by which an entry lies outside `[0, 1]`.
    pub max_range_violation: f64,
    /// Largest `|sum_{a,b} P_{x,y}(a,b) - 1|`.
    pub max_normalization_error: f64,
    /// Largest difference between marginals that should coincide.
    pub max_signaling: f64,
    pub tolerance: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.nonnegative && self.normalized && self.no_signaling
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionTuple {
    scenario: BellScenario,
    p: Vec<f64>,
}

impl DistributionTuple {
    /// Wraps a flat `[x][y][a][b]` tensor. Only the shape is checked here;
    /// use [`validate`](Self::validate) for the probabilistic checks.
    pub fn from_flat(scenario: BellScenario, p: Vec<f64>) -> Result<Self> {
        if p.len() != scenario.len() {
            return Err(Error::DimensionMismatch(format!(
                "tensor has {} entries, scenario needs {}",
                p.len(),
                scenario.len()
            )));
        }
        Ok(Self { scenario, p })
    }

    pub fn from_nested(scenario: BellScenario, nested: &[Vec<Vec<Vec<f64>>>]) -> Result<Self> {
        let (m, n, ka, kb) = (scenario.m(), scenario.n(), scenario.ka(), scenario.kb());
        let mismatch = |what: &str, got: usize, want: usize| {
            Error::DimensionMismatch(format!("{what}: got {got}, expected {want}"))
        };
        if nested.len() != m {
            return Err(mismatch("x dimension", nested.len(), m));
        }
        let mut p = Vec::with_capacity(scenario.len());
        for row in nested {
            if row.len() != n {
                return Err(mismatch("y dimension", row.len(), n));
            }
            for block in row {
                if block.len() != ka {
                    return Err(mismatch("a dimension", block.len(), ka));
                }
                for line in block {
                    if line.len() != kb {
                        return Err(mismatch("b dimension", line.len(), kb));
                    }
                    p.extend_from_slice(line);
                }
            }
        }
        Ok(Self { scenario, p })
    }

    /// Builds a tuple from a function of `(x, y, a, b)` positions.
    pub fn from_fn(scenario: BellScenario, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut p = Vec::with_capacity(scenario.len());
        for x in 0..scenario.m() {
            for y in 0..scenario.n() {
                for a in 0..scenario.ka() {
                    for b in 0..scenario.kb() {
                        p.push(f(x, y, a, b));
                    }
                }
            }
        }
        Self { scenario, p }
    }

    /// Every block equal to the uniform distribution over outputs.
    pub fn uniform(scenario: BellScenario) -> Self {
        let w = 1.0 / (scenario.ka() * scenario.kb()) as f64;
        Self::from_fn(scenario, |_, _, _, _| w)
    }

    /// PR box: `P_{x,y}(a,b) = 1/2` iff `a*b = (-1)^{x*y}` (0-based inputs).
    pub fn pr_box() -> Self {
        let s = BellScenario::chsh();
        let outs = s.outputs_a().to_vec();
        Self::from_fn(s, |x, y, a, b| {
            let sign = if x == 1 && y == 1 { -1 } else { 1 };
            if outs[a] * outs[b] == sign {
                0.5
            } else {
                0.0
            }
        })
    }

    pub fn scenario(&self) -> &BellScenario {
        &self.scenario
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.p
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.p[self.scenario.index(x, y, a, b)]
    }

    /// The `|A| x |B|` block `P_{x,y}` in row-major order.
    pub fn block(&self, x: usize, y: usize) -> &[f64] {
        let start = self.scenario.index(x, y, 0, 0);
        &self.p[start..start + self.scenario.ka() * self.scenario.kb()]
    }

    pub fn nested(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        let s = &self.scenario;
        (0..s.m())
            .map(|x| {
                (0..s.n())
                    .map(|y| (0..s.ka()).map(|a| (0..s.kb()).map(|b| self.get(x, y, a, b)).collect()).collect())
                    .collect()
            })
            .collect()
    }

    /// Alice's marginal `sum_b P_{x,y}(a,b)`.
    pub fn marginal_a(&self, x: usize, y: usize) -> Vec<f64> {
        let kb = self.scenario.kb();
        self.block(x, y).chunks(kb).map(|row| row.iter().sum()).collect()
    }

    /// Bob's marginal `sum_a P_{x,y}(a,b)`.
    pub fn marginal_b(&self, x: usize, y: usize) -> Vec<f64> {
        let kb = self.scenario.kb();
        let mut out = vec![0.0; kb];
        for row in self.block(x, y).chunks(kb) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        let s = &self.scenario;
        let max_range_violation = self.p.iter().map(|&v| (-v).max(v - 1.0).max(0.0)).fold(0.0, f64::max);
        let mut max_normalization_error = 0.0f64;
        for x in 0..s.m() {
            for y in 0..s.n() {
                let total: f64 = self.block(x, y).iter().sum();
                max_normalization_error = max_normalization_error.max((total - 1.0).abs());
            }
        }
        let max_signaling = self.max_signaling();
        ValidationReport {
            nonnegative: max_range_violation <= tol,
            normalized: max_normalization_error <= tol,
            no_signaling: max_signaling <= tol,
            max_range_violation,
            max_normalization_error,
            max_signaling,
            tolerance: tol,
        }
    }

    /// Worst deviation from the no-signaling conditions.
    pub fn max_signaling(&self) -> f64 {
        let s = &self.scenario;
        let mut worst = 0.0f64;
        for x in 0..s.m() {
            let reference = self.marginal_a(x, 0);
            for y in 1..s.n() {
                for (r, v) in reference.iter().zip(self.marginal_a(x, y)) {
                    worst = worst.max((r - v).abs());
                }
            }
        }
        for y in 0..s.n() {
            let reference = self.marginal_b(0, y);
            for x in 1..s.m() {
                for (r, v) in reference.iter().zip(self.marginal_b(x, y)) {
                    worst = worst.max((r - v).abs());
                }
            }
        }
        worst
    }

    /// Fails with [`Error::InvalidArgument`] if any check fails at `tol`.
    pub fn ensure_valid(&self, tol: f64) -> Result<()> {
        let report = self.validate(tol);
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "tuple fails validation (range {:.3e}, normalization {:.3e}, signaling {:.3e})",
                report.max_range_violation, report.max_normalization_error, report.max_signaling
            )))
        }
    }

    /// `<A_x B_y> = sum_{a,b} a b P_{x,y}(a,b)`; needs `{-1,+1}` alphabets.
    pub fn correlator(&self, x: usize, y: usize) -> Result<f64> {
        let s = &self.scenario;
        s.require_pm1()?;
        if x >= s.m() || y >= s.n() {
            return Err(Error::InvalidArgument(format!("input pair ({x},{y}) out of range")));
        }
        let (oa, ob) = (s.outputs_a(), s.outputs_b());
        let mut acc = 0.0;
        for (a, &va) in oa.iter().enumerate() {
            for (b, &vb) in ob.iter().enumerate() {
                acc += (va * vb) as f64 * self.get(x, y, a, b);
            }
        }
        Ok(acc)
    }

    /// Keeps only the listed inputs, in the given order.
    pub fn restrict(&self, alice: &[usize], bob: &[usize]) -> Result<Self> {
        let s = &self.scenario;
        if alice.is_empty() || bob.is_empty() {
            return Err(Error::InvalidArgument("restriction needs at least one input per party".into()));
        }
        if alice.iter().any(|&x| x >= s.m()) || bob.iter().any(|&y| y >= s.n()) {
            return Err(Error::InvalidArgument("restriction input out of range".into()));
        }
        let sub = BellScenario::new(alice.len(), bob.len(), s.outputs_a().to_vec(), s.outputs_b().to_vec())?;
        Ok(Self::from_fn(sub, |x, y, a, b| self.get(alice[x], bob[y], a, b)))
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &Self, lambda: f64) -> Result<Self> {
        if self.scenario != other.scenario {
            return Err(Error::DimensionMismatch("mixing tuples from different scenarios".into()));
        }
        let p = self.p.iter().zip(&other.p).map(|(u, v)| lambda * u + (1.0 - lambda) * v).collect();
        Ok(Self { scenario: self.scenario.clone(), p })
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.scenario != other.scenario {
            return Err(Error::DimensionMismatch("comparing tuples from different scenarios".into()));
        }
        Ok(self.p.iter().zip(&other.p).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max))
    }

    pub fn to_file(&self) -> TupleFile {
        TupleFile {
            m: self.scenario.m(),
            n: self.scenario.n(),
            outputs_a: self.scenario.outputs_a().to_vec(),
            outputs_b: self.scenario.outputs_b().to_vec(),
            p: self.nested(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TupleFile = serde_json::from_str(text)?;
        file.into_tuple()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("tuple serialization is infallible")
    }
}

/// On-disk form of a tuple: `{"m", "n", "outputs_a", "outputs_b", "p"}` with
/// `p` nested as `[x][y][a][b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleFile {
    pub m: usize,
    pub n: usize,
    pub outputs_a: Vec<i64>,
    pub outputs_b: Vec<i64>,
    pub p: Vec<Vec<Vec<Vec<f64>>>>,
}

impl TupleFile {
    pub fn into_tuple(self) -> Result<DistributionTuple> {
        let scenario = BellScenario::new(self.m, self.n, self.outputs_a, self.outputs_b)?;
        DistributionTuple::from_nested(scenario, &self.p)
    }
}

impl Serialize for DistributionTuple {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_file().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DistributionTuple {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        TupleFile::deserialize(deserializer)?.into_tuple().map_err(serde::de::Error::custom)
    }
}

/// The one-parameter family with `P_{1,1} = P_{2,1} = (1 + ab cos t)/4`,
/// `P_{1,2} = (1 + ab sin t)/4`, `P_{2,2} = (1 - ab sin t)/4` and, when
/// `extended`, a third uncorrelated Alice input `P_{3,y} = 1/4`.
pub fn make_theta_family(theta: f64, extended: bool) -> DistributionTuple {
    let m = if extended { 3 } else { 2 };
    let scenario = BellScenario::binary(m, 2).expect("binary scenario is valid");
    let outs = scenario.outputs_a().to_vec();
    let (c, s) = (theta.cos(), theta.sin());
    DistributionTuple::from_fn(scenario, |x, y, a, b| {
        let ab = (outs[a] * outs[b]) as f64;
        let corr = match (x, y) {
            (0, 0) | (1, 0) => c,
            (0, 1) => s,
            (1, 1) => -s,
            _ => 0.0,
        };
        (1.0 + ab * corr) / 4.0
    })
}

/// Alice's input substitution mapping the extended family onto its primed
/// partner: inputs 0 and 2 both read input 0, input 1 reads input 1.
pub const THETA_SUBSTITUTION: [usize; 3] = [0, 1, 0];

/// The primed tuple `P'_{x,y} = P_{z(x),y}` with `z` = [`THETA_SUBSTITUTION`].
pub fn make_theta_family_primed(theta: f64) -> DistributionTuple {
    let p = make_theta_family(theta, true);
    let scenario = p.scenario().clone();
    DistributionTuple::from_fn(scenario, |x, y, a, b| p.get(THETA_SUBSTITUTION[x], y, a, b))
}
