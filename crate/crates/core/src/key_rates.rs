//! Closed-form device-independent key-rate bounds (entropies in bits).
//!
//! * `eve_bound(S) = h(1/2 + sqrt(S^2/4 - 1)/2)` bounds Eve's information for
//!   a CHSH value `S` above 2.
//! * `r0_theta_bound` is the single-protocol bound for the primed
//!   one-parameter family.
//! * `g'(s) = 1 - h(3/4 + s/8) - h(1/2 + sqrt(s + s^2/4)/2)` with
//!   `g = max(0, g')` lower-bounds the rate as a function of `N`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monotones::{best_chsh, select_inputs, SelectionStrategy, CHSH_QUANTUM_MAX_N};
use crate::scenario::DistributionTuple;

const SLACK: f64 = 1e-12;
const DOMAIN_SLACK: f64 = 1e-9;
pub const TSIRELSON: f64 = 2.0 * std::f64::consts::SQRT_2;

/// `h(p) = -p log2 p - (1-p) log2 (1-p)`, with `h(0) = h(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(-SLACK..=1.0 + SLACK).contains(&p) || p.is_nan() {
        return Err(Error::InvalidArgument(format!("binary entropy argument {p} outside [0,1]")));
    }
    let p = p.clamp(0.0, 1.0);
    Ok(plogp(p) + plogp(1.0 - p))
}

fn plogp(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

fn entropy_of(probs: impl IntoIterator<Item = f64>) -> f64 {
    probs.into_iter().map(plogp).sum()
}

/// `I(A:B) = H(A) + H(B) - H(A,B)` for a 2x2 joint table.
pub fn mutual_information_binary(joint: [[f64; 2]; 2]) -> Result<f64> {
    mutual_information(&[joint[0].to_vec(), joint[1].to_vec()])
}

/// Mutual information in bits of an arbitrary joint table.
pub fn mutual_information(joint: &[Vec<f64>]) -> Result<f64> {
    let total: f64 = joint.iter().flatten().sum();
    if (total - 1.0).abs() > DOMAIN_SLACK || joint.iter().flatten().any(|&v| v < -SLACK || v.is_nan()) {
        return Err(Error::InvalidArgument(format!("joint table is not a distribution (sum {total})")));
    }
    let cols = joint.first().map_or(0, Vec::len);
    if joint.iter().any(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch("ragged joint table".into()));
    }
    let ha = entropy_of(joint.iter().map(|r| r.iter().sum::<f64>()));
    let hb = entropy_of((0..cols).map(|b| joint.iter().map(|r| r[b]).sum::<f64>()));
    let hab = entropy_of(joint.iter().flatten().map(|v| v.max(0.0)));
    Ok((ha + hb - hab).max(0.0))
}

/// `h(1/2 + x/2)` with `x` clamped to `[0, 1]`.
fn h_half_plus(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    plogp(0.5 + x / 2.0) + plogp(0.5 - x / 2.0)
}

/// Eve's information bound for CHSH value `S`; 1 when `S <= 2`.
pub fn eve_bound(s: f64) -> Result<f64> {
    if s.is_nan() || s > TSIRELSON + DOMAIN_SLACK {
        return Err(Error::InvalidArgument(format!("CHSH value {s} exceeds the quantum maximum")));
    }
    if s <= 2.0 {
        return Ok(1.0);
    }
    Ok(h_half_plus((s * s / 4.0 - 1.0).max(0.0).sqrt()))
}

/// `1 - h(1/2 + cos t / 2) - h(1/2 + sqrt(sin 2t)/2)`, unclamped.
pub fn r0_theta_bound(theta: f64) -> Result<f64> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(Error::InvalidArgument(format!("theta {theta} outside [0, pi/2]")));
    }
    let first = h_half_plus(theta.cos());
    let second = h_half_plus((2.0 * theta).sin().max(0.0).sqrt());
    Ok(1.0 - first - second)
}

fn check_s(s: f64) -> Result<f64> {
    if s.is_nan() || !(-DOMAIN_SLACK..=CHSH_QUANTUM_MAX_N + DOMAIN_SLACK).contains(&s) {
        return Err(Error::InvalidArgument(format!("N value {s} outside [0, 2 sqrt 2 - 2]")));
    }
    Ok(s.clamp(0.0, CHSH_QUANTUM_MAX_N))
}

/// `r(s) = h(1/2 + sqrt(s + s^2/4)/2)`; zero at `s = 2 sqrt 2 - 2`.
pub fn r(s: f64) -> Result<f64> {
    let s = check_s(s)?;
    Ok(h_half_plus((s + s * s / 4.0).sqrt()))
}

pub fn g_prime(s: f64) -> Result<f64> {
    let s = check_s(s)?;
    Ok(1.0 - binary_entropy(0.75 + s / 8.0)? - r(s)?)
}

pub fn g(s: f64) -> Result<f64> {
    Ok(g_prime(s)?.max(0.0))
}

/// Bisection for a sign change of `f` on `[lo, hi]`, to width `tol`.
/// Returns the endpoint on the side where `f` has the sign of `f(lo)`.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let flo = f(lo);
    let fhi = f(hi);
    if flo.signum() == fhi.signum() || flo == 0.0 || fhi == 0.0 {
        if flo == 0.0 {
            return Ok(lo);
        }
        if fhi == 0.0 {
            return Ok(hi);
        }
        return Err(Error::Numerical(format!("no sign change on [{lo}, {hi}]")));
    }
    let lo_sign = flo.signum();
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The root of `g'` in `(0, 2 sqrt 2 - 2)`: above it `g` is strictly positive.
pub fn threshold() -> f64 {
    let f = |s: f64| g_prime(s).expect("bracket inside domain");
    bisect(f, 0.0, CHSH_QUANTUM_MAX_N, 1e-15).expect("g' changes sign on its domain")
}

/// Largest `theta` in `[0, pi/2]` where `r0_theta_bound` is positive.
pub fn r0_positivity_limit() -> f64 {
    let f = |t: f64| r0_theta_bound(t).expect("bracket inside domain");
    bisect(f, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2, 1e-15).expect("bound changes sign")
}

/// All bounds evaluated for one tuple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// `max_nu |sum nu <A_x B_y>|` on the selected 2x2 inputs.
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "N_tilde")]
    pub n_tilde: f64,
    /// `I(A:B)` of the masked protocol on the most correlated input pair.
    pub mutual_info: f64,
    pub eve_bound: f64,
    /// `max(0, mutual_info - eve_bound)`.
    pub dw_lower: f64,
    pub g_of_n: f64,
    /// `N_tilde > threshold()`.
    pub threshold_flag: bool,
}

/// Joint of `A = E A_x, B = E B_y` with a uniform public sign `E`:
/// `(P_{x,y}(a,b) + P_{x,y}(-a,-b)) / 2`.
pub fn masked_joint(p: &DistributionTuple, x: usize, y: usize) -> Result<[[f64; 2]; 2]> {
    let s = p.scenario();
    s.require_pm1()?;
    // Two-symbol alphabets {-1,+1}: negation swaps the positions.
    let mut joint = [[0.0; 2]; 2];
    for (a, row) in joint.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            *v = 0.5 * (p.get(x, y, a, b) + p.get(x, y, 1 - a, 1 - b));
        }
    }
    Ok(joint)
}

pub fn rate_report(p: &DistributionTuple) -> Result<RateReport> {
    let restricted = if p.scenario().m() == 2 && p.scenario().n() == 2 {
        p.clone()
    } else {
        select_inputs(p, SelectionStrategy::MaxChsh)?.restricted
    };
    let (s, _) = best_chsh(&restricted)?;
    let n_tilde = (s - 2.0).max(0.0);
    let pair = select_inputs(p, SelectionStrategy::MaxCorrelator)?;
    let mutual_info = mutual_information_binary(masked_joint(p, pair.alice[0], pair.bob[0])?)?;
    let eve = eve_bound(s)?;
    let g_of_n = g(n_tilde)?;
    Ok(RateReport {
        s,
        n_tilde,
        mutual_info,
        eve_bound: eve,
        dw_lower: (mutual_info - eve).max(0.0),
        g_of_n,
        threshold_flag: n_tilde > threshold(),
    })
}
