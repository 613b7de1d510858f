//! Seeded Monte Carlo simulation of raw-key protocols.
//!
//! Rounds are grouped in fixed blocks of [`BLOCK_ROUNDS`]; block `j` draws
//! from ChaCha8 stream `j` of the run seed. Counts are summed over blocks,
//! so results are identical for any number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::key_rates::{masked_joint, mutual_information};
use crate::local_polytope::DeterministicVertex;
use crate::monotones::NuMap;
use crate::scenario::{BellScenario, DistributionTuple};
use crate::transforms::{OrderCertificate, Wiring};

pub const BLOCK_ROUNDS: u64 = 1 << 16;

/// Certificates whose reconstruction error exceeds this are refused.
pub const CERTIFICATE_TOL: f64 = 1e-8;

/// Per-round traces are only kept for runs up to this size.
pub const TRACE_LIMIT: u64 = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolSpec {
    /// `A = E A_xi`, `B = E B_zeta` with a uniform public sign `E`.
    MeasureAndMask { xi: usize, zeta: usize },
    /// `A = nu(X,Y) E U`, `B = E V` with uniform `X, Y` in `{0,1}` and sign `E`.
    NuMasked { nu: NuMap },
    /// The wiring protocol realizing an order certificate at inputs `(x, y)`.
    WiringLemma { certificate: OrderCertificate, x: usize, y: usize },
}

impl ProtocolSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProtocolSpec::MeasureAndMask { .. } => "measure_and_mask",
            ProtocolSpec::NuMasked { .. } => "nu_masked",
            ProtocolSpec::WiringLemma { .. } => "wiring_lemma",
        }
    }
}

/// Inverse-CDF sampler over every `P_{x,y}` block.
#[derive(Debug, Clone)]
pub struct RoundSampler {
    scenario: BellScenario,
    cumulative: Vec<f64>,
}

impl RoundSampler {
    pub fn new(p: &DistributionTuple) -> Self {
        let s = p.scenario().clone();
        let width = s.ka() * s.kb();
        let mut cumulative = Vec::with_capacity(s.len());
        for block in p.as_slice().chunks(width) {
            let mut acc = 0.0;
            for v in block {
                acc += v.max(0.0);
                cumulative.push(acc);
            }
        }
        Self { scenario: s, cumulative }
    }

    /// Output positions `(a, b)` drawn from `P_{x,y}`.
    pub fn sample<R: Rng + ?Sized>(&self, x: usize, y: usize, rng: &mut R) -> (usize, usize) {
        let width = self.scenario.ka() * self.scenario.kb();
        let start = self.scenario.index(x, y, 0, 0);
        let cum = &self.cumulative[start..start + width];
        let u = rng.random::<f64>() * cum[width - 1];
        let idx = cum.iter().position(|&c| u < c).unwrap_or_else(|| {
            // u landed on the total due to rounding: last cell with mass.
            (0..width).rev().find(|&i| i == 0 || cum[i] > cum[i - 1]).unwrap_or(0)
        });
        (idx / self.scenario.kb(), idx % self.scenario.kb())
    }
}

/// One round drawn from `P_{x,y}`, returned as output positions.
pub fn sample_round<R: Rng + ?Sized>(p: &DistributionTuple, x: usize, y: usize, rng: &mut R) -> Result<(usize, usize)> {
    if x >= p.scenario().m() || y >= p.scenario().n() {
        return Err(Error::InvalidArgument(format!("input pair ({x},{y}) out of range")));
    }
    Ok(RoundSampler::new(&p.restrict(&[x], &[y])?).sample(0, 0, rng))
}

/// One row of a per-round trace; outputs are alphabet values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: u64,
    pub k: Option<usize>,
    pub x: usize,
    pub y: usize,
    pub e: Option<i64>,
    pub u: i64,
    pub v: i64,
    pub a: i64,
    pub b: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub protocol: String,
    pub rounds: u64,
    pub seed: u64,
    pub outputs_a: Vec<i64>,
    pub outputs_b: Vec<i64>,
    pub counts: Vec<Vec<u64>>,
    /// Empirical joint of `(A, B)`, indexed by output position.
    pub joint_ab: Vec<Vec<f64>>,
    /// Binomial standard error of each cell of `joint_ab`.
    pub cell_stderr: Vec<Vec<f64>>,
    /// `<AB>`; present for `{-1,+1}` alphabets.
    pub empirical_correlator: Option<f64>,
    pub correlator_stderr: Option<f64>,
    /// Plug-in mutual information in bits.
    pub empirical_mi: f64,
}

impl SimResult {
    fn from_counts(protocol: &str, seed: u64, s: &BellScenario, counts: Vec<Vec<u64>>) -> Result<Self> {
        let rounds: u64 = counts.iter().flatten().sum();
        let n = rounds as f64;
        let joint_ab: Vec<Vec<f64>> = counts.iter().map(|r| r.iter().map(|&c| c as f64 / n).collect()).collect();
        let cell_stderr = joint_ab.iter().map(|r| r.iter().map(|&q| (q * (1.0 - q) / n).sqrt()).collect()).collect();
        let (empirical_correlator, correlator_stderr) = if s.is_pm1() {
            let c = correlator_of(s, &joint_ab);
            (Some(c), Some(((1.0 - c * c).max(0.0) / n).sqrt()))
        } else {
            (None, None)
        };
        let empirical_mi = mutual_information(&joint_ab)?;
        Ok(Self {
            protocol: protocol.to_string(),
            rounds,
            seed,
            outputs_a: s.outputs_a().to_vec(),
            outputs_b: s.outputs_b().to_vec(),
            counts,
            joint_ab,
            cell_stderr,
            empirical_correlator,
            correlator_stderr,
            empirical_mi,
        })
    }

    /// Total-variation distance to a reference table.
    pub fn tv_distance(&self, reference: &[Vec<f64>]) -> f64 {
        tv_distance(&self.joint_ab, reference)
    }
}

pub fn tv_distance(u: &[Vec<f64>], v: &[Vec<f64>]) -> f64 {
    0.5 * u.iter().flatten().zip(v.iter().flatten()).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// `sum a b q(a,b)` for a joint over `{-1,+1}` alphabets.
pub fn correlator_of(s: &BellScenario, joint: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for (a, row) in joint.iter().enumerate() {
        for (b, q) in row.iter().enumerate() {
            acc += (s.outputs_a()[a] * s.outputs_b()[b]) as f64 * q;
        }
    }
    acc
}

struct Outcome {
    k: Option<usize>,
    x: usize,
    y: usize,
    e: Option<i64>,
    u: i64,
    v: i64,
    a: usize,
    b: usize,
}

fn position(alphabet: &[i64], value: i64) -> usize {
    alphabet.iter().position(|&o| o == value).expect("value checked to lie in the alphabet")
}

fn random_sign<R: Rng + ?Sized>(rng: &mut R) -> i64 {
    if rng.random::<bool>() {
        1
    } else {
        -1
    }
}

/// Precomputed per-round logic of a protocol.
enum Plan<'a> {
    Masked {
        xi: usize,
        zeta: usize,
    },
    Nu {
        nu: NuMap,
    },
    Lemma {
        x: usize,
        y: usize,
        /// Cumulative over `[p0, p_1, ..]`.
        k_cdf: Vec<f64>,
        vertex_cdf: Vec<f64>,
        vertices: Vec<&'a DeterministicVertex>,
        wirings: Vec<&'a Wiring>,
    },
}

struct Runner<'a> {
    scenario: BellScenario,
    sampler: RoundSampler,
    plan: Plan<'a>,
}

fn cdf(weights: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .into_iter()
        .map(|w| {
            acc += w.max(0.0);
            acc
        })
        .collect()
}

fn draw(cdf: &[f64], rng: &mut impl Rng) -> usize {
    let total = *cdf.last().expect("non-empty distribution");
    let u = rng.random::<f64>() * total;
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

impl<'a> Runner<'a> {
    fn new(p: &DistributionTuple, spec: &'a ProtocolSpec) -> Result<Self> {
        let s = p.scenario().clone();
        let plan = match spec {
            ProtocolSpec::MeasureAndMask { xi, zeta } => {
                s.require_pm1()?;
                if *xi >= s.m() || *zeta >= s.n() {
                    return Err(Error::InvalidArgument(format!("inputs ({xi},{zeta}) out of range")));
                }
                Plan::Masked { xi: *xi, zeta: *zeta }
            }
            ProtocolSpec::NuMasked { nu } => {
                s.require_pm1()?;
                if s.m() < 2 || s.n() < 2 {
                    return Err(Error::UnsupportedScenario("nu-masked protocol needs two inputs per party".into()));
                }
                Plan::Nu { nu: *nu }
            }
            ProtocolSpec::WiringLemma { certificate, x, y } => {
                if *x >= s.m() || *y >= s.n() {
                    return Err(Error::InvalidArgument(format!("inputs ({x},{y}) out of range")));
                }
                if certificate.residual > CERTIFICATE_TOL || (certificate.total_weight() - 1.0).abs() > CERTIFICATE_TOL
                {
                    return Err(Error::InvalidArgument(format!(
                        "certificate residual {:.3e} / mass {:.12} outside tolerance",
                        certificate.residual,
                        certificate.total_weight()
                    )));
                }
                for term in &certificate.terms {
                    term.wiring.check(&s)?;
                }
                let local = certificate.local_part.as_ref();
                let vertices: Vec<&DeterministicVertex> =
                    local.map(|l| l.weights.iter().map(|(v, _)| v).collect()).unwrap_or_default();
                if vertices.iter().any(|v| v.scenario != s) {
                    return Err(Error::DimensionMismatch("certificate local part is for another scenario".into()));
                }
                let p0 = if vertices.is_empty() { 0.0 } else { certificate.p0 };
                Plan::Lemma {
                    x: *x,
                    y: *y,
                    k_cdf: cdf(std::iter::once(p0).chain(certificate.terms.iter().map(|t| t.weight))),
                    vertex_cdf: cdf(local
                        .map(|l| l.weights.iter().map(|(_, w)| *w).collect::<Vec<_>>())
                        .unwrap_or_default()),
                    vertices,
                    wirings: certificate.terms.iter().map(|t| &t.wiring).collect(),
                }
            }
        };
        Ok(Self { sampler: RoundSampler::new(p), scenario: s, plan })
    }

    fn round(&self, rng: &mut ChaCha8Rng) -> Outcome {
        let s = &self.scenario;
        let (oa, ob) = (s.outputs_a(), s.outputs_b());
        match &self.plan {
            Plan::Masked { xi, zeta } => {
                let e = random_sign(rng);
                let (ui, vi) = self.sampler.sample(*xi, *zeta, rng);
                let (u, v) = (oa[ui], ob[vi]);
                Outcome { k: None, x: *xi, y: *zeta, e: Some(e), u, v, a: position(oa, e * u), b: position(ob, e * v) }
            }
            Plan::Nu { nu } => {
                let x = rng.random_range(0..2);
                let y = rng.random_range(0..2);
                let e = random_sign(rng);
                let (ui, vi) = self.sampler.sample(x, y, rng);
                let (u, v) = (oa[ui], ob[vi]);
                let a = nu.sign(x, y) * e * u;
                Outcome { k: None, x, y, e: Some(e), u, v, a: position(oa, a), b: position(ob, e * v) }
            }
            Plan::Lemma { x, y, k_cdf, vertex_cdf, vertices, wirings } => {
                let k = draw(k_cdf, rng);
                if k == 0 {
                    let vtx = vertices[draw(vertex_cdf, rng)];
                    let (a, b) = (vtx.a_assign[*x], vtx.b_assign[*y]);
                    Outcome { k: Some(0), x: *x, y: *y, e: None, u: oa[a], v: ob[b], a, b }
                } else {
                    let w = wirings[k - 1];
                    let (sx, sy) = (w.z[*x], w.t[*y]);
                    let (ui, vi) = self.sampler.sample(sx, sy, rng);
                    Outcome { k: Some(k), x: sx, y: sy, e: None, u: oa[ui], v: ob[vi], a: w.f[*x][ui], b: w.g[*y][vi] }
                }
            }
        }
    }

    fn run_block(&self, seed: u64, block: u64, rounds: u64, trace: bool) -> (Vec<u64>, Vec<TraceRow>) {
        let s = &self.scenario;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block);
        let start = block * BLOCK_ROUNDS;
        let end = (start + BLOCK_ROUNDS).min(rounds);
        let mut counts = vec![0u64; s.ka() * s.kb()];
        let mut rows = Vec::new();
        for round in start..end {
            let o = self.round(&mut rng);
            counts[o.a * s.kb() + o.b] += 1;
            if trace {
                rows.push(TraceRow {
                    round,
                    k: o.k,
                    x: o.x,
                    y: o.y,
                    e: o.e,
                    u: o.u,
                    v: o.v,
                    a: s.outputs_a()[o.a],
                    b: s.outputs_b()[o.b],
                });
            }
        }
        (counts, rows)
    }

    fn run(&self, rounds: u64, seed: u64, trace: bool) -> (Vec<Vec<u64>>, Vec<TraceRow>) {
        let s = &self.scenario;
        let blocks: Vec<(Vec<u64>, Vec<TraceRow>)> = (0..rounds.div_ceil(BLOCK_ROUNDS))
            .into_par_iter()
            .map(|j| self.run_block(seed, j, rounds, trace))
            .collect();
        let mut total = vec![0u64; s.ka() * s.kb()];
        let mut rows = Vec::new();
        for (counts, block_rows) in blocks {
            for (t, c) in total.iter_mut().zip(counts) {
                *t += c;
            }
            rows.extend(block_rows);
        }
        (total.chunks(s.kb()).map(<[u64]>::to_vec).collect(), rows)
    }
}

fn check_rounds(rounds: u64) -> Result<()> {
    if rounds == 0 {
        return Err(Error::InvalidArgument("rounds must be at least 1".into()));
    }
    Ok(())
}

pub fn run_protocol(p: &DistributionTuple, spec: &ProtocolSpec, rounds: u64, seed: u64) -> Result<SimResult> {
    check_rounds(rounds)?;
    let runner = Runner::new(p, spec)?;
    let (counts, _) = runner.run(rounds, seed, false);
    SimResult::from_counts(spec.name(), seed, p.scenario(), counts)
}

/// Like [`run_protocol`] but also returns every round; limited to
/// [`TRACE_LIMIT`] rounds.
pub fn run_protocol_traced(
    p: &DistributionTuple,
    spec: &ProtocolSpec,
    rounds: u64,
    seed: u64,
) -> Result<(SimResult, Vec<TraceRow>)> {
    check_rounds(rounds)?;
    if rounds > TRACE_LIMIT {
        return Err(Error::InvalidArgument(format!("trace limited to {TRACE_LIMIT} rounds")));
    }
    let runner = Runner::new(p, spec)?;
    let (counts, rows) = runner.run(rounds, seed, true);
    Ok((SimResult::from_counts(spec.name(), seed, p.scenario(), counts)?, rows))
}

/// Empirical table of `(A'_x, B'_y)` produced by the wiring protocol of a
/// certificate; converges to `P'_{x,y}`.
pub fn run_lemma_protocol(
    p: &DistributionTuple,
    certificate: &OrderCertificate,
    x: usize,
    y: usize,
    rounds: u64,
    seed: u64,
) -> Result<SimResult> {
    let spec = ProtocolSpec::WiringLemma { certificate: certificate.clone(), x, y };
    run_protocol(p, &spec, rounds, seed)
}

/// Exact joint of `(A, B)` for the protocol, by output position.
pub fn analytic_joint(p: &DistributionTuple, spec: &ProtocolSpec) -> Result<Vec<Vec<f64>>> {
    let s = p.scenario();
    match spec {
        ProtocolSpec::MeasureAndMask { xi, zeta } => {
            if *xi >= s.m() || *zeta >= s.n() {
                return Err(Error::InvalidArgument(format!("inputs ({xi},{zeta}) out of range")));
            }
            Ok(masked_joint(p, *xi, *zeta)?.iter().map(|r| r.to_vec()).collect())
        }
        ProtocolSpec::NuMasked { nu } => {
            s.require_pm1()?;
            if s.m() < 2 || s.n() < 2 {
                return Err(Error::UnsupportedScenario("nu-masked protocol needs two inputs per party".into()));
            }
            let (oa, ob) = (s.outputs_a(), s.outputs_b());
            let mut joint = vec![vec![0.0; 2]; 2];
            for x in 0..2 {
                for y in 0..2 {
                    for e in [-1i64, 1] {
                        for (ui, &u) in oa.iter().enumerate() {
                            for (vi, &v) in ob.iter().enumerate() {
                                let a = position(oa, nu.sign(x, y) * e * u);
                                let b = position(ob, e * v);
                                joint[a][b] += p.get(x, y, ui, vi) / 8.0;
                            }
                        }
                    }
                }
            }
            Ok(joint)
        }
        ProtocolSpec::WiringLemma { certificate, x, y } => {
            let target = certificate.reconstruct(p)?;
            Ok(target.block(*x, *y).chunks(s.kb()).map(<[f64]>::to_vec).collect())
        }
    }
}
