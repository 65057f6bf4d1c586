//! Tail and moment bounds built from the normal kernel and the constants.
//!
//! For a supermartingale whose increments satisfy bracket (or one-sided plus
//! variance) conditions with aggregate scale `s`,
//!
//! ```text
//! P(S_n ≥ x) ≤ B_opt(x) = inf_{t<x} E(sZ − t)₊⁵ / (x − t)⁵
//!            ≤ min(c₅,₀ Ψ(x/s), exp(−x²/2s²)).
//! ```

use crate::constants::{c_const, doob_factor, k1_const, k_const, AlphaBeta};
use crate::error::{domain, ensure_finite, Error, Result};
use crate::normal_kernel::{scaled_moment, upper_tail, MomentOrder};
use crate::optimize;

/// `c₅,₀ = 5!(e/5)⁵`.
pub fn c50() -> f64 {
    c_const(AlphaBeta::new(5.0, 0.0).expect("valid pair"))
}

/// `2e³/9 = c₃,₀`.
pub fn c30() -> f64 {
    c_const(AlphaBeta::new(3.0, 0.0).expect("valid pair"))
}

/// Threshold `x` and positive scale.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BoundQuery {
    pub x: f64,
    pub scale: f64,
}

impl BoundQuery {
    pub fn new(x: f64, scale: f64) -> Result<Self> {
        ensure_finite("x", x)?;
        ensure_finite("scale", scale)?;
        if scale <= 0.0 {
            return domain(format!("scale must be positive, got {scale}"));
        }
        Ok(BoundQuery { x, scale })
    }

    /// Standardized threshold `x/s`.
    pub fn ratio(&self) -> f64 {
        self.x / self.scale
    }
}

/// `exp(−x²/2s²)` for `x > 0`, else 1.
pub fn hoeffding_bound(q: BoundQuery) -> f64 {
    let u = q.ratio();
    if u <= 0.0 {
        1.0
    } else {
        (-0.5 * u * u).exp()
    }
}

/// `c₅,₀ Ψ(x/s)`, unclamped.
pub fn pinelis_bound(q: BoundQuery) -> f64 {
    c50() * upper_tail(q.ratio()).expect("finite ratio")
}

/// `min(1, hoeffding, pinelis)`.
pub fn combined_bound(q: BoundQuery) -> f64 {
    hoeffding_bound(q).min(pinelis_bound(q)).min(1.0)
}

/// The optimal bound over the generators `(· − t)₊⁵`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct OptimalBound {
    pub value: f64,
    pub arg_t: f64,
    /// The infimum is approached as `t → −∞` and was not attained on the
    /// scanned range; `value` then includes the limit value 1.
    pub boundary_limit: bool,
}

/// Scan exponents `j` of the offsets `x − s·10^j`.
const OPT_SCAN: (f64, f64, f64) = (-6.0, 6.0, 0.05);

/// `inf_{t<x} E(sZ − t)₊⁵/(x − t)⁵`, approximated by a log-spaced scan of
/// `t = x − s·10^j`, `j ∈ [−6, 6]`, and golden-section refinement.
pub fn optimal_bound(q: BoundQuery) -> OptimalBound {
    let u = q.ratio();
    let objective = |j: f64| {
        let gap = 10f64.powf(j);
        let tau = u - gap;
        let m = scaled_moment(1.0, tau, MomentOrder::FIVE).expect("finite argument");
        m / gap.powi(5)
    };
    let (lo, hi, step) = OPT_SCAN;
    // Golden-section on j to 1e-9 keeps the objective within ~1e-8 relative.
    let found = optimize::scan_then_golden(objective, lo, hi, step, 1e-9);
    let arg_t = q.scale * (u - 10f64.powf(found.arg));
    let on_left_edge = found.at_edge && found.arg > 0.0;
    if on_left_edge {
        OptimalBound {
            value: found.value.min(1.0),
            arg_t,
            boundary_limit: true,
        }
    } else {
        OptimalBound {
            value: found.value,
            arg_t,
            boundary_limit: false,
        }
    }
}

/// Named bound values for one query.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BoundReport {
    pub query: BoundQuery,
    pub hoeffding: f64,
    pub pinelis: f64,
    pub combined: f64,
    pub optimal: f64,
    pub optimal_t: f64,
    pub boundary_limit: bool,
}

pub fn bound_report(q: BoundQuery) -> BoundReport {
    let opt = optimal_bound(q);
    BoundReport {
        query: q,
        hoeffding: hoeffding_bound(q),
        pinelis: pinelis_bound(q),
        combined: combined_bound(q),
        optimal: opt.value,
        optimal_t: opt.arg_t,
        boundary_limit: opt.boundary_limit,
    }
}

/// Exceedance probabilities `P(X_i ≥ D_{i−1})` plus the query at scale `ŝ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationInput {
    pub exceed_probs: Vec<f64>,
    pub query: BoundQuery,
}

/// Union-bound truncation: `min(1, Σ P(X_i ≥ D_{i−1}) + combined(x, ŝ))`.
pub fn truncation_bound(inp: &TruncationInput) -> Result<f64> {
    for (i, &p) in inp.exceed_probs.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return domain(format!("exceed_probs[{i}] = {p} is not a probability"));
        }
    }
    let mass = crate::sum::sum(inp.exceed_probs.iter().copied());
    Ok((mass + combined_bound(inp.query)).min(1.0))
}

/// Bound on `P(M_n ≥ x)` for a martingale started at 0; the same value as
/// [`combined_bound`].
pub fn maximal_tail_bound(q: BoundQuery) -> f64 {
    combined_bound(q)
}

fn check_gap(x: f64, t: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    ensure_finite("t", t)?;
    if x <= t {
        return domain(format!("need x > t, got x = {x}, t = {t}"));
    }
    Ok(x - t)
}

fn check_moment(m: f64) -> Result<()> {
    if m.is_finite() && m >= 0.0 {
        Ok(())
    } else {
        domain(format!("snapshot moment must be finite and nonnegative, got {m}"))
    }
}

/// `E(M_n − x)₊^β ≤ k₁ E(S_n − t)₊^α / (x − t)^{α−β}`.
pub fn maximal_moment_bound(ab: AlphaBeta, x: f64, t: f64, snapshot_moment: f64) -> Result<f64> {
    let gap = check_gap(x, t)?;
    check_moment(snapshot_moment)?;
    let k1 = k1_const(ab)?;
    Ok(k1 * snapshot_moment / gap.powf(ab.alpha() - ab.beta()))
}

/// `E(S_n − x)₊^β ≤ k_{α,β} E(S_n − t)₊^α / (x − t)^{α−β}`.
pub fn snapshot_moment_bound(ab: AlphaBeta, x: f64, t: f64, snapshot_moment: f64) -> Result<f64> {
    let gap = check_gap(x, t)?;
    check_moment(snapshot_moment)?;
    Ok(k_const(ab) * snapshot_moment / gap.powf(ab.alpha() - ab.beta()))
}

/// Doob's `E(M_n)₊^α ≤ (α/(α−1))^α E(S_n)₊^α`.
pub fn doob_moment_bound(alpha: f64, snapshot_moment: f64) -> Result<f64> {
    if !(alpha > 1.0) {
        return domain(format!("Doob's moment inequality needs alpha > 1, got {alpha}"));
    }
    check_moment(snapshot_moment)?;
    Ok(doob_factor(alpha) * snapshot_moment)
}

/// `(v)₊^β` with `(v)₊⁰ = 1{v ≥ 0}`, so that the `β = 0` case is a tail
/// indicator.
pub fn positive_power(v: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        if v >= 0.0 {
            1.0
        } else {
            0.0
        }
    } else if v > 0.0 {
        v.powf(beta)
    } else {
        0.0
    }
}

/// The point `u* = (αx − βt)/(α − β)` where the pointwise inequality is tight.
pub fn tight_point(ab: AlphaBeta, x: f64, t: f64) -> Result<f64> {
    check_gap(x, t)?;
    if ab.alpha() == ab.beta() {
        return domain("no finite tight point when alpha = beta");
    }
    Ok((ab.alpha() * x - ab.beta() * t) / (ab.alpha() - ab.beta()))
}

/// Pointwise `(u − x)₊^β ≤ k_{α,β} (u − t)₊^α / (x − t)^{α−β}` within
/// 1e−12 absolute slack.
pub fn pointwise_k_check(ab: AlphaBeta, x: f64, t: f64, u: f64) -> Result<bool> {
    let gap = check_gap(x, t)?;
    ensure_finite("u", u)?;
    let lhs = positive_power(u - x, ab.beta());
    let rhs = k_const(ab) * positive_power(u - t, ab.alpha()) / gap.powf(ab.alpha() - ab.beta());
    Ok(lhs <= rhs + 1e-12)
}

/// Largest `n` for which the symmetric binomial law is computed exactly.
pub const RADEMACHER_EXACT_MAX: u32 = 62;

/// Exact `P(ε₁ + … + ε_n ≥ y)` for independent symmetric signs, as a count
/// over `2^n` sign patterns.
pub fn rademacher_tail_count(n: u32, y: f64) -> Result<(u64, u32)> {
    if n == 0 {
        return domain("n must be at least 1");
    }
    if n > RADEMACHER_EXACT_MAX {
        return Err(Error::Range(format!(
            "exact binomial coefficients limited to n <= {RADEMACHER_EXACT_MAX}, got {n}"
        )));
    }
    ensure_finite("y", y)?;
    // Σε = 2k − n with k plus signs; lattice comparisons tolerate rounding.
    let kmin = ((n as f64 + y) / 2.0 - 1e-9).ceil().max(0.0);
    if kmin > n as f64 {
        return Ok((0, n));
    }
    let kmin = kmin as u64;
    let mut count: u64 = 0;
    let mut binom: u128 = 1; // C(n, 0)
    for k in 0..=n as u64 {
        if k >= kmin {
            count += binom as u64;
        }
        if k < n as u64 {
            binom = binom * (n as u64 - k) as u128 / (k + 1) as u128;
        }
    }
    Ok((count, n))
}

/// `(2e³/9)·P(n^{−1/2}(ε₁ + … + ε_n) ≥ x)`.
pub fn rademacher_discrete_bound(n: u32, x: f64) -> Result<f64> {
    let (count, bits) = rademacher_tail_count(n, x * (n as f64).sqrt())?;
    Ok(c30() * count as f64 / 2f64.powi(bits as i32))
}

/// `x/s` where `c₅,₀ Ψ(x/s) = exp(−x²/2s²)` on `(1, 3)`, by bisection.
pub fn pinelis_hoeffding_crossover() -> f64 {
    let diff = |u: f64| {
        let q = BoundQuery { x: u, scale: 1.0 };
        pinelis_bound(q) - hoeffding_bound(q)
    };
    let (mut lo, mut hi) = (1.0, 3.0);
    debug_assert!(diff(lo) > 0.0 && diff(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if diff(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}
