//! The local polytope: deterministic vertices, LP membership with dual
//! certificates, and the local fraction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{Feasibility, Optimum, StandardForm};
use crate::monotones::BellFunctional;
use crate::scenario::{BellScenario, DistributionTuple};

pub const DEFAULT_VERTEX_CAP: u128 = 1_000_000;

/// Deterministic local strategy: Alice answers `a_assign[x]`, Bob
/// `b_assign[y]` (output positions).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeterministicVertex {
    pub scenario: BellScenario,
    pub a_assign: Vec<usize>,
    pub b_assign: Vec<usize>,
}

impl DeterministicVertex {
    pub fn new(scenario: BellScenario, a_assign: Vec<usize>, b_assign: Vec<usize>) -> Result<Self> {
        if a_assign.len() != scenario.m() || b_assign.len() != scenario.n() {
            return Err(Error::DimensionMismatch("vertex assignment length".into()));
        }
        if a_assign.iter().any(|&a| a >= scenario.ka()) || b_assign.iter().any(|&b| b >= scenario.kb()) {
            return Err(Error::InvalidArgument("vertex output outside alphabet".into()));
        }
        Ok(Self { scenario, a_assign, b_assign })
    }

    pub fn tuple(&self) -> DistributionTuple {
        DistributionTuple::from_fn(self.scenario.clone(), |x, y, a, b| {
            if self.a_assign[x] == a && self.b_assign[y] == b {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Stable text key: Alice's output values, then Bob's, e.g. `"-1,1|1,1"`.
    pub fn key(&self) -> String {
        let join =
            |assign: &[usize], outs: &[i64]| assign.iter().map(|&i| outs[i].to_string()).collect::<Vec<_>>().join(",");
        format!(
            "{}|{}",
            join(&self.a_assign, self.scenario.outputs_a()),
            join(&self.b_assign, self.scenario.outputs_b())
        )
    }
}

pub fn vertex_count(s: &BellScenario) -> u128 {
    (s.ka() as u128).pow(s.m() as u32) * (s.kb() as u128).pow(s.n() as u32)
}

pub fn enumerate_vertices(s: &BellScenario) -> Result<Vec<DeterministicVertex>> {
    enumerate_vertices_capped(s, DEFAULT_VERTEX_CAP)
}

/// All vertices in lexicographic order of `(a_0, .., a_{m-1}, b_0, .., b_{n-1})`.
pub fn enumerate_vertices_capped(s: &BellScenario, cap: u128) -> Result<Vec<DeterministicVertex>> {
    let count = vertex_count(s);
    if count > cap {
        return Err(Error::CapExceeded { what: "local vertex enumeration", count, cap });
    }
    let radices: Vec<usize> = std::iter::repeat_n(s.ka(), s.m()).chain(std::iter::repeat_n(s.kb(), s.n())).collect();
    let mut digits = vec![0usize; radices.len()];
    let mut out = Vec::with_capacity(count as usize);
    loop {
        out.push(DeterministicVertex {
            scenario: s.clone(),
            a_assign: digits[..s.m()].to_vec(),
            b_assign: digits[s.m()..].to_vec(),
        });
        let mut pos = radices.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < radices[pos] {
                break;
            }
            digits[pos] = 0;
        }
    }
}

/// Convex weights over vertices reproducing a tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDecomposition {
    /// Nonzero weights only, in vertex enumeration order.
    pub weights: Vec<(DeterministicVertex, f64)>,
    /// Max entrywise error of the reconstruction.
    pub residual: f64,
}

impl LocalDecomposition {
    pub fn reconstruct(&self) -> Option<DistributionTuple> {
        let scenario = self.weights.first()?.0.scenario.clone();
        let mut acc = vec![0.0; scenario.len()];
        for (v, w) in &self.weights {
            for x in 0..scenario.m() {
                for y in 0..scenario.n() {
                    acc[scenario.index(x, y, v.a_assign[x], v.b_assign[y])] += w;
                }
            }
        }
        DistributionTuple::from_flat(scenario, acc).ok()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().map(|(_, w)| w).sum()
    }

    pub fn weight_map(&self) -> BTreeMap<String, f64> {
        self.weights.iter().map(|(v, w)| (v.key(), *w)).collect()
    }
}

/// Separating functional: `value = beta . P` exceeds `local_bound`, the
/// maximum of `beta . D` over all vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlocalVerdict {
    pub bell_functional: BellFunctional,
    pub value: f64,
    pub local_bound: f64,
    /// Phase-1 optimum (sum of artificials) that triggered the verdict.
    pub infeasibility: f64,
}

impl NonlocalVerdict {
    pub fn gap(&self) -> f64 {
        self.value - self.local_bound
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LocalVerdict {
    Local(LocalDecomposition),
    Nonlocal(NonlocalVerdict),
}

impl LocalVerdict {
    pub fn is_local(&self) -> bool {
        matches!(self, LocalVerdict::Local(_))
    }

    pub fn to_certificate(&self) -> Certificate {
        match self {
            LocalVerdict::Local(d) => Certificate {
                kind: CertificateKind::Local,
                weights: Some(d.weight_map()),
                bell_functional: None,
                value: None,
                local_bound: None,
                residual: d.residual,
            },
            LocalVerdict::Nonlocal(v) => Certificate {
                kind: CertificateKind::Nonlocal,
                weights: None,
                bell_functional: Some(v.bell_functional.nested()),
                value: Some(v.value),
                local_bound: Some(v.local_bound),
                residual: v.infeasibility,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateKind {
    Local,
    Nonlocal,
}

/// JSON form of a [`LocalVerdict`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub weights: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bell_functional: Option<Vec<Vec<Vec<Vec<f64>>>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub local_bound: Option<f64>,
    pub residual: f64,
}

/// Columns `D_v` with a trailing mass entry 1.
fn vertex_columns(vertices: &[DeterministicVertex], with_mass: bool) -> Vec<Vec<f64>> {
    vertices
        .iter()
        .map(|v| {
            let mut col = v.tuple().into_vec();
            if with_mass {
                col.push(1.0);
            }
            col
        })
        .collect()
}

/// Decides `P` in the local set by phase-1 LP over all vertices.
pub fn is_local(p: &DistributionTuple, tol: f64) -> Result<LocalVerdict> {
    let vertices = enumerate_vertices(p.scenario())?;
    let columns = vertex_columns(&vertices, true);
    let mut rhs = p.as_slice().to_vec();
    rhs.push(1.0);
    let lp = StandardForm::new(&columns, &rhs)?;
    match lp.feasibility(tol)? {
        Feasibility::Feasible { x, .. } => {
            let weights: Vec<_> = vertices.into_iter().zip(x).filter(|(_, w)| *w > 0.0).collect();
            let mut decomposition = LocalDecomposition { weights, residual: 0.0 };
            decomposition.residual = match decomposition.reconstruct() {
                Some(r) => r.max_abs_diff(p)?,
                None => f64::INFINITY,
            };
            if decomposition.residual > tol {
                return Err(Error::Numerical(format!(
                    "phase 1 accepted but reconstruction error is {:.3e}",
                    decomposition.residual
                )));
            }
            Ok(LocalVerdict::Local(decomposition))
        }
        Feasibility::Infeasible { farkas, infeasibility } => {
            let beta = farkas[..p.scenario().len()].to_vec();
            let functional = BellFunctional::new(p.scenario().clone(), beta, 0.0)?;
            let value = functional.value(p)?;
            let local_bound = max_over_vertices(&functional, &vertices)?;
            if value - local_bound <= 0.0 {
                return Err(Error::Numerical(format!(
                    "dual certificate does not separate (gap {:.3e})",
                    value - local_bound
                )));
            }
            Ok(LocalVerdict::Nonlocal(NonlocalVerdict {
                bell_functional: functional,
                value,
                local_bound,
                infeasibility,
            }))
        }
    }
}

/// `max_v beta . D_v`, evaluated directly.
pub fn max_over_vertices(f: &BellFunctional, vertices: &[DeterministicVertex]) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for v in vertices {
        let s = &v.scenario;
        let mut acc = 0.0;
        for x in 0..s.m() {
            for y in 0..s.n() {
                acc += f.coefficients[s.index(x, y, v.a_assign[x], v.b_assign[y])];
            }
        }
        best = best.max(acc - f.offset);
    }
    Ok(best)
}

/// Largest `w` with `P = w L + (1 - w) Q`, `L` local and `Q` no-signaling.
///
/// Solved as `max sum_v q_v` subject to `sum_v q_v D_v + s = P`, `q, s >= 0`:
/// the slack `s` is the unnormalized remainder `(1 - w) Q`, which is
/// no-signaling whenever `P` is, since every `D_v` is.
pub fn local_fraction(p: &DistributionTuple) -> Result<f64> {
    let vertices = enumerate_vertices(p.scenario())?;
    let r = p.scenario().len();
    let mut columns = vertex_columns(&vertices, false);
    for i in 0..r {
        let mut e = vec![0.0; r];
        e[i] = 1.0;
        columns.push(e);
    }
    let cost: Vec<f64> = (0..columns.len()).map(|j| if j < vertices.len() { -1.0 } else { 0.0 }).collect();
    let rhs: Vec<f64> = p.as_slice().iter().map(|v| v.max(0.0)).collect();
    let lp = StandardForm::new(&columns, &rhs)?;
    match lp.minimize(&cost, crate::scenario::DEFAULT_TOL)? {
        Optimum::Optimal { objective, .. } => Ok((-objective).clamp(0.0, 1.0)),
        Optimum::Infeasible { .. } => Err(Error::Numerical("local-fraction LP reported infeasible".into())),
        Optimum::Unbounded => Err(Error::Numerical("local-fraction LP reported unbounded".into())),
    }
}
