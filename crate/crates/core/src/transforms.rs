//! Allowed transformations of the resource theory.
//!
//! Every deterministic transformation reduces to a canonical [`Wiring`]:
//! inputs are routed through `z` (Alice) and `t` (Bob), then outputs pass
//! through per-input self-maps `F_x` and `G_y`:
//!
//! ```text
//! W(P)_{x,y}(a,b) = sum_{F_x(a') = a, G_y(b') = b} P_{z(x),t(y)}(a',b')
//! ```
//!
//! Randomness (shared or local) only enters as convex weights, which the
//! order check handles as LP variables.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local_polytope::{enumerate_vertices, is_local, DeterministicVertex, LocalDecomposition};
use crate::lp::{Feasibility, StandardForm};
use crate::monotones::BellFunctional;
use crate::scenario::{BellScenario, DistributionTuple};

pub const DEFAULT_WIRING_CAP: u128 = 10_000_000;

/// Column images are compared on this grid when deduplicating.
const DEDUP_SCALE: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

/// Canonical deterministic transformation. All maps use 0-based positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Wiring {
    /// Alice's input map, `z[x]` is the input actually measured for `x`.
    pub z: Vec<usize>,
    /// Bob's input map.
    pub t: Vec<usize>,
    /// `f[x][a']` is Alice's reported output when input `x` yields `a'`.
    pub f: Vec<Vec<usize>>,
    pub g: Vec<Vec<usize>>,
}

impl Wiring {
    pub fn identity(s: &BellScenario) -> Self {
        Self {
            z: (0..s.m()).collect(),
            t: (0..s.n()).collect(),
            f: vec![(0..s.ka()).collect(); s.m()],
            g: vec![(0..s.kb()).collect(); s.n()],
        }
    }

    pub fn check(&self, s: &BellScenario) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("malformed wiring: {what}")));
        if self.z.len() != s.m() || self.z.iter().any(|&x| x >= s.m()) {
            return bad("alice input map");
        }
        if self.t.len() != s.n() || self.t.iter().any(|&y| y >= s.n()) {
            return bad("bob input map");
        }
        if self.f.len() != s.m() || self.f.iter().any(|f| f.len() != s.ka() || f.iter().any(|&a| a >= s.ka())) {
            return bad("alice output maps");
        }
        if self.g.len() != s.n() || self.g.iter().any(|g| g.len() != s.kb() || g.iter().any(|&b| b >= s.kb())) {
            return bad("bob output maps");
        }
        Ok(())
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Wiring) -> Wiring {
        let z = next.z.iter().map(|&x| self.z[x]).collect();
        let t = next.t.iter().map(|&y| self.t[y]).collect();
        let f = next.f.iter().zip(&next.z).map(|(fx, &src)| self.f[src].iter().map(|&a| fx[a]).collect()).collect();
        let g = next.g.iter().zip(&next.t).map(|(gy, &src)| self.g[src].iter().map(|&b| gy[b]).collect()).collect();
        Wiring { z, t, f, g }
    }

    /// Position in [`enumerate_wirings`] order.
    pub fn index(&self, s: &BellScenario) -> Result<u64> {
        self.check(s)?;
        let mut idx: u128 = 0;
        for (digit, radix) in self.digits(s) {
            idx = idx * radix as u128 + digit as u128;
        }
        u64::try_from(idx).map_err(|_| Error::InvalidArgument("wiring index overflows u64".into()))
    }

    pub fn from_index(s: &BellScenario, index: u64) -> Result<Wiring> {
        let count = wiring_count(s);
        if index as u128 >= count {
            return Err(Error::InvalidArgument(format!("wiring index {index} >= {count}")));
        }
        let radices = digit_radices(s);
        let mut digits = vec![0usize; radices.len()];
        let mut rest = index as u128;
        for (d, &r) in digits.iter_mut().zip(&radices).rev() {
            *d = (rest % r as u128) as usize;
            rest /= r as u128;
        }
        let mut it = digits.into_iter();
        let mut take = |k: usize| -> Vec<usize> { it.by_ref().take(k).collect() };
        let z = take(s.m());
        let t = take(s.n());
        let f = (0..s.m()).map(|_| take(s.ka())).collect();
        let g = (0..s.n()).map(|_| take(s.kb())).collect();
        Ok(Wiring { z, t, f, g })
    }

    fn digits(&self, s: &BellScenario) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (m, n, ka, kb) = (s.m(), s.n(), s.ka(), s.kb());
        self.z
            .iter()
            .map(move |&d| (d, m))
            .chain(self.t.iter().map(move |&d| (d, n)))
            .chain(self.f.iter().flatten().map(move |&d| (d, ka)))
            .chain(self.g.iter().flatten().map(move |&d| (d, kb)))
    }
}

fn digit_radices(s: &BellScenario) -> Vec<usize> {
    std::iter::repeat_n(s.m(), s.m())
        .chain(std::iter::repeat_n(s.n(), s.n()))
        .chain(std::iter::repeat_n(s.ka(), s.ka() * s.m()))
        .chain(std::iter::repeat_n(s.kb(), s.kb() * s.n()))
        .collect()
}

/// `m^m n^n |A|^{|A| m} |B|^{|B| n}`, saturating.
pub fn wiring_count(s: &BellScenario) -> u128 {
    digit_radices(s).into_iter().fold(1u128, |acc, r| acc.saturating_mul(r as u128))
}

fn check_wiring_cap(s: &BellScenario, cap: u128) -> Result<u128> {
    let count = wiring_count(s);
    if count > cap {
        return Err(Error::CapExceeded { what: "wiring enumeration", count, cap });
    }
    Ok(count)
}

pub fn enumerate_wirings(s: &BellScenario) -> Result<Vec<Wiring>> {
    enumerate_wirings_capped(s, DEFAULT_WIRING_CAP)
}

/// Every canonical wiring, in mixed-radix order of
/// `(z, t, f[0], .., f[m-1], g[0], .., g[n-1])`.
pub fn enumerate_wirings_capped(s: &BellScenario, cap: u128) -> Result<Vec<Wiring>> {
    let count = check_wiring_cap(s, cap)? as u64;
    (0..count).map(|i| Wiring::from_index(s, i)).collect()
}

pub fn apply_wiring(p: &DistributionTuple, w: &Wiring) -> Result<DistributionTuple> {
    let s = p.scenario();
    w.check(s)?;
    let mut out = vec![0.0; s.len()];
    for x in 0..s.m() {
        for y in 0..s.n() {
            let src = p.block(w.z[x], w.t[y]);
            let (fx, gy) = (&w.f[x], &w.g[y]);
            for a in 0..s.ka() {
                for b in 0..s.kb() {
                    out[s.index(x, y, fx[a], gy[b])] += src[a * s.kb() + b];
                }
            }
        }
    }
    DistributionTuple::from_flat(s.clone(), out)
}

/// The moves named in the resource theory. Each is a special [`Wiring`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "move", rename_all = "snake_case")]
pub enum ElementaryMove {
    /// Input `input` of `party` measures `source` instead.
    InputSubstitution { party: Party, input: usize, source: usize },
    /// Swaps two inputs of `party`.
    InputTransposition { party: Party, first: usize, second: usize },
    /// Output `o` of `input` is reported as `permutation[o]`.
    OutputRelabeling { party: Party, input: usize, permutation: Vec<usize> },
    /// Outputs in `subset` are merged onto `representative`.
    OutputCoarseGraining { party: Party, input: usize, subset: Vec<usize>, representative: usize },
}

impl ElementaryMove {
    fn check(&self, s: &BellScenario) -> Result<()> {
        let (inputs, outputs) = match self.party() {
            Party::Alice => (s.m(), s.ka()),
            Party::Bob => (s.n(), s.kb()),
        };
        let invalid = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            ElementaryMove::InputSubstitution { input, source, .. } => {
                if *input >= inputs || *source >= inputs {
                    return invalid(format!("substitution {input}->{source} out of range"));
                }
            }
            ElementaryMove::InputTransposition { first, second, .. } => {
                if *first >= inputs || *second >= inputs {
                    return invalid(format!("transposition ({first},{second}) out of range"));
                }
            }
            ElementaryMove::OutputRelabeling { input, permutation, .. } => {
                if *input >= inputs {
                    return invalid(format!("input {input} out of range"));
                }
                let mut seen = vec![false; outputs];
                if permutation.len() != outputs
                    || permutation.iter().any(|&o| o >= outputs || std::mem::replace(&mut seen[o], true))
                {
                    return invalid(format!("{permutation:?} is not a permutation of {outputs} outputs"));
                }
            }
            ElementaryMove::OutputCoarseGraining { input, subset, representative, .. } => {
                if *input >= inputs {
                    return invalid(format!("input {input} out of range"));
                }
                let mut seen = vec![false; outputs];
                if subset.is_empty() || subset.iter().any(|&o| o >= outputs || std::mem::replace(&mut seen[o], true)) {
                    return invalid(format!("bad coarse-graining subset {subset:?}"));
                }
                if !subset.contains(representative) {
                    return invalid(format!("representative {representative} not in subset {subset:?}"));
                }
            }
        }
        Ok(())
    }

    pub fn party(&self) -> &Party {
        match self {
            ElementaryMove::InputSubstitution { party, .. }
            | ElementaryMove::InputTransposition { party, .. }
            | ElementaryMove::OutputRelabeling { party, .. }
            | ElementaryMove::OutputCoarseGraining { party, .. } => party,
        }
    }

    pub fn to_wiring(&self, s: &BellScenario) -> Result<Wiring> {
        self.check(s)?;
        let mut w = Wiring::identity(s);
        let (inputs, maps) = match self.party() {
            Party::Alice => (&mut w.z, &mut w.f),
            Party::Bob => (&mut w.t, &mut w.g),
        };
        match self {
            ElementaryMove::InputSubstitution { input, source, .. } => inputs[*input] = *source,
            ElementaryMove::InputTransposition { first, second, .. } => {
                inputs.swap(*first, *second);
            }
            ElementaryMove::OutputRelabeling { input, permutation, .. } => maps[*input] = permutation.clone(),
            ElementaryMove::OutputCoarseGraining { input, subset, representative, .. } => {
                for &o in subset {
                    maps[*input][o] = *representative;
                }
            }
        }
        Ok(w)
    }
}

/// Applies one move directly on the tensor, independently of [`apply_wiring`].
pub fn apply_elementary(p: &DistributionTuple, mv: &ElementaryMove) -> Result<DistributionTuple> {
    let s = p.scenario().clone();
    mv.check(&s)?;
    let alice = *mv.party() == Party::Alice;
    // Input relabelling on either side.
    let route = |x: usize, y: usize| -> (usize, usize) {
        let (own, other) = if alice { (x, y) } else { (y, x) };
        let own = match mv {
            ElementaryMove::InputSubstitution { input, source, .. } if own == *input => *source,
            ElementaryMove::InputTransposition { first, second, .. } if own == *first => *second,
            ElementaryMove::InputTransposition { first, second, .. } if own == *second => *first,
            _ => own,
        };
        if alice {
            (own, other)
        } else {
            (other, own)
        }
    };
    let out = DistributionTuple::from_fn(s.clone(), |x, y, a, b| {
        let (sx, sy) = route(x, y);
        let target_input = if alice { x } else { y };
        let own_out = if alice { a } else { b };
        let read = |o: usize| if alice { p.get(sx, sy, o, b) } else { p.get(sx, sy, a, o) };
        match mv {
            ElementaryMove::OutputRelabeling { input, permutation, .. } if target_input == *input => {
                let src = permutation.iter().position(|&q| q == own_out).expect("checked permutation");
                read(src)
            }
            ElementaryMove::OutputCoarseGraining { input, subset, representative, .. }
                if target_input == *input && subset.contains(&own_out) =>
            {
                if own_out == *representative {
                    subset.iter().map(|&o| read(o)).sum()
                } else {
                    0.0
                }
            }
            _ => read(own_out),
        }
    });
    Ok(out)
}

/// `p_mix * P + (1 - p_mix) * L`, with `L` checked to be local.
pub fn mix_with_local(
    p: &DistributionTuple,
    local: &DistributionTuple,
    weight: f64,
    tol: f64,
) -> Result<DistributionTuple> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::InvalidArgument(format!("mixing weight {weight} outside [0,1]")));
    }
    if p.scenario() != local.scenario() {
        return Err(Error::DimensionMismatch("mixing tuples from different scenarios".into()));
    }
    if !is_local(local, tol)?.is_local() {
        return Err(Error::InvalidArgument("mixing partner is not Bell local".into()));
    }
    p.mix(local, weight)
}

/// One wired image of `P` used in an order certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderTerm {
    pub weight: f64,
    pub wiring_index: u64,
    pub wiring: Wiring,
}

/// Witness that `P'` is reachable from `P`:
/// `P' = p0 L + sum_k p_k W_k(P)` with `L` local.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderCertificate {
    pub p0: f64,
    /// Normalized local part; `None` when `p0` is zero.
    pub local_part: Option<LocalDecomposition>,
    pub terms: Vec<OrderTerm>,
    /// Max entrywise error of the reconstruction against `P'`.
    pub residual: f64,
}

impl OrderCertificate {
    /// `p0 L + sum_k p_k W_k(P)`.
    pub fn reconstruct(&self, p: &DistributionTuple) -> Result<DistributionTuple> {
        let s = p.scenario();
        let mut acc = vec![0.0; s.len()];
        if let Some(local) = self.local_part.as_ref().and_then(|l| l.reconstruct()) {
            for (o, v) in acc.iter_mut().zip(local.as_slice()) {
                *o += self.p0 * v;
            }
        }
        for term in &self.terms {
            let image = apply_wiring(p, &term.wiring)?;
            for (o, v) in acc.iter_mut().zip(image.as_slice()) {
                *o += term.weight * v;
            }
        }
        DistributionTuple::from_flat(s.clone(), acc)
    }

    pub fn total_weight(&self) -> f64 {
        self.p0 + self.terms.iter().map(|t| t.weight).sum::<f64>()
    }

    /// Single-wiring certificate with weight 1.
    pub fn single(p: &DistributionTuple, target: &DistributionTuple, wiring: Wiring) -> Result<Self> {
        let wiring_index = wiring.index(p.scenario())?;
        let mut cert = OrderCertificate {
            p0: 0.0,
            local_part: None,
            terms: vec![OrderTerm { weight: 1.0, wiring_index, wiring }],
            residual: 0.0,
        };
        cert.residual = cert.reconstruct(p)?.max_abs_diff(target)?;
        Ok(cert)
    }

    /// Pure local certificate `P' = L`.
    pub fn local_only(decomposition: LocalDecomposition) -> Self {
        let residual = decomposition.residual;
        OrderCertificate { p0: 1.0, local_part: Some(decomposition), terms: vec![], residual }
    }

    pub fn to_file(&self) -> OrderCertificateFile {
        OrderCertificateFile {
            p0: self.p0,
            local_weights: self.local_part.as_ref().map(|l| l.weight_map()).unwrap_or_default(),
            terms: self.terms.clone(),
            residual: self.residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderCertificateFile {
    pub p0: f64,
    pub local_weights: BTreeMap<String, f64>,
    pub terms: Vec<OrderTerm>,
    pub residual: f64,
}

/// Dual witness: `value = beta . P'` exceeds `beta . X` for every local
/// vertex and every wired image `X` of `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderWitness {
    pub bell_functional: BellFunctional,
    pub value: f64,
    pub max_achievable: f64,
    pub infeasibility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OrderVerdict {
    Feasible(OrderCertificate),
    Infeasible(OrderWitness),
}

impl OrderVerdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, OrderVerdict::Feasible(_))
    }
}

fn dedup_key(col: &[f64]) -> Vec<i64> {
    col.iter().map(|v| (v * DEDUP_SCALE).round() as i64).collect()
}

/// Distinct images `W(P)` over all wirings, each tagged with the lowest
/// wiring index producing it.
pub fn distinct_wiring_images(p: &DistributionTuple, cap: u128) -> Result<Vec<(u64, DistributionTuple)>> {
    let s = p.scenario();
    let count = check_wiring_cap(s, cap)? as u64;
    const CHUNK: u64 = 4096;
    let chunks: Vec<Vec<(u64, DistributionTuple)>> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| -> Result<Vec<(u64, DistributionTuple)>> {
            let mut seen = HashMap::new();
            let mut local = Vec::new();
            for i in c * CHUNK..((c + 1) * CHUNK).min(count) {
                let image = apply_wiring(p, &Wiring::from_index(s, i)?)?;
                if seen.insert(dedup_key(image.as_slice()), ()).is_none() {
                    local.push((i, image));
                }
            }
            Ok(local)
        })
        .collect::<Result<_>>()?;
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for (i, image) in chunks.into_iter().flatten() {
        if seen.insert(dedup_key(image.as_slice()), ()).is_none() {
            out.push((i, image));
        }
    }
    Ok(out)
}

/// Decides whether `P` is not less nonlocal than `target` by LP over the
/// local vertices and every distinct wired image of `P`.
pub fn check_order(p: &DistributionTuple, target: &DistributionTuple, tol: f64) -> Result<OrderVerdict> {
    check_order_capped(p, target, tol, DEFAULT_WIRING_CAP)
}

pub fn check_order_capped(
    p: &DistributionTuple,
    target: &DistributionTuple,
    tol: f64,
    cap: u128,
) -> Result<OrderVerdict> {
    let s = p.scenario();
    if s != target.scenario() {
        return Err(Error::DimensionMismatch("order check needs tuples from one scenario".into()));
    }
    let vertices = enumerate_vertices(s)?;
    let images = distinct_wiring_images(p, cap)?;
    let with_mass = |v: &[f64]| {
        let mut col = v.to_vec();
        col.push(1.0);
        col
    };
    let columns: Vec<Vec<f64>> = vertices
        .iter()
        .map(|v| with_mass(v.tuple().as_slice()))
        .chain(images.iter().map(|(_, img)| with_mass(img.as_slice())))
        .collect();
    let rhs = with_mass(target.as_slice());
    let lp = StandardForm::new(&columns, &rhs)?;
    match lp.feasibility(tol)? {
        Feasibility::Feasible { x, .. } => {
            let (local_x, wired_x) = x.split_at(vertices.len());
            let p0: f64 = local_x.iter().sum();
            let local_part = (p0 > 0.0).then(|| {
                let weights: Vec<(DeterministicVertex, f64)> =
                    vertices.iter().cloned().zip(local_x.iter().map(|w| w / p0)).filter(|(_, w)| *w > 0.0).collect();
                LocalDecomposition { weights, residual: 0.0 }
            });
            let terms = images
                .iter()
                .zip(wired_x)
                .filter(|(_, w)| **w > 0.0)
                .map(|((idx, _), w)| -> Result<OrderTerm> {
                    Ok(OrderTerm { weight: *w, wiring_index: *idx, wiring: Wiring::from_index(s, *idx)? })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut cert = OrderCertificate { p0, local_part, terms, residual: 0.0 };
            cert.residual = cert.reconstruct(p)?.max_abs_diff(target)?;
            if cert.residual > tol {
                return Err(Error::Numerical(format!(
                    "order LP accepted but reconstruction error is {:.3e}",
                    cert.residual
                )));
            }
            Ok(OrderVerdict::Feasible(cert))
        }
        Feasibility::Infeasible { farkas, infeasibility } => {
            let beta = farkas[..s.len()].to_vec();
            let functional = BellFunctional::new(s.clone(), beta, 0.0)?;
            let value = functional.value(target)?;
            let mut max_achievable = crate::local_polytope::max_over_vertices(&functional, &vertices)?;
            for (_, image) in &images {
                max_achievable = max_achievable.max(functional.value(image)?);
            }
            if value <= max_achievable {
                return Err(Error::Numerical(format!(
                    "order witness does not separate (gap {:.3e})",
                    value - max_achievable
                )));
            }
            Ok(OrderVerdict::Infeasible(OrderWitness {
                bell_functional: functional,
                value,
                max_achievable,
                infeasibility,
            }))
        }
    }
}
