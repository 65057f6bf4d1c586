//! Constant families `c_{α,β}`, `k_{α,β}`, `k₁`, `k₂`, `k₃`, one-step scales
//! and their Euclidean aggregation.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use crate::error::{domain, ensure_finite, Result};
use crate::optimize;
use crate::quadrature;

/// Order pair with `0 ≤ β ≤ α`, `α > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaBeta {
    alpha: f64,
    beta: f64,
}

impl AlphaBeta {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        ensure_finite("alpha", alpha)?;
        ensure_finite("beta", beta)?;
        if alpha <= 0.0 {
            return domain(format!("alpha must be positive, got {alpha}"));
        }
        if beta < 0.0 || beta > alpha {
            return domain(format!("beta must lie in [0, alpha] = [0, {alpha}], got {beta}"));
        }
        Ok(AlphaBeta { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn require_alpha_above_one(&self, what: &str) -> Result<()> {
        if self.alpha > 1.0 {
            Ok(())
        } else {
            domain(format!("{what} requires alpha > 1, got {}", self.alpha))
        }
    }
}

/// `x·ln x` with the limit value 0 at `x = 0`.
fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `ln(Γ(a+1)(e/a)^a)`, equal to 0 in the limit `a → 0`.
fn log_gamma_e_term(a: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        libm::lgamma(a + 1.0) + a - xlogx(a)
    }
}

/// `c_{α,β} = Γ(α+1)(e/α)^α / (Γ(β+1)(e/β)^β)`.
pub fn c_const(ab: AlphaBeta) -> f64 {
    if ab.alpha == ab.beta {
        return 1.0;
    }
    (log_gamma_e_term(ab.alpha) - log_gamma_e_term(ab.beta)).exp()
}

/// `k_{α,β} = β^β (α−β)^{α−β} / α^α`, with `0⁰ = 1`.
pub fn k_const(ab: AlphaBeta) -> f64 {
    let (a, b) = (ab.alpha, ab.beta);
    (xlogx(b) + xlogx(a - b) - xlogx(a)).exp()
}

/// `k₂ = Γ(1+β)Γ(α−β)/Γ(α)`; undefined at `β = α`.
pub fn k2_const(ab: AlphaBeta) -> Result<f64> {
    ab.require_alpha_above_one("k2")?;
    if ab.beta >= ab.alpha {
        return domain("k2 has a pole at beta = alpha (Gamma(0))");
    }
    if ab.beta == 0.0 {
        return Ok(1.0);
    }
    let (a, b) = (ab.alpha, ab.beta);
    Ok((libm::lgamma(1.0 + b) + libm::lgamma(a - b) - libm::lgamma(a)).exp())
}

/// `k₃ = k_{α,β}·(α/(α−1))^α`.
pub fn k3_const(ab: AlphaBeta) -> Result<f64> {
    ab.require_alpha_above_one("k3")?;
    Ok(k_const(ab) * doob_factor(ab.alpha))
}

/// `(α/(α−1))^α`, Doob's `L^α` constant.
pub fn doob_factor(alpha: f64) -> f64 {
    (alpha * (alpha / (alpha - 1.0)).ln()).exp()
}

/// `J(σ) = ∫₀^σ β s^{β−1}/(1+s) ds`.
///
/// On `[0, min(σ,1)]` the substitution `v = s^β` gives the bounded integrand
/// `1/(1+v^{1/β})`; beyond 1 the substitution `s = e^w` is used.
pub fn k1_inner_integral(beta: f64, sigma: f64) -> f64 {
    let head_end = sigma.min(1.0).powf(beta);
    let inv_beta = 1.0 / beta;
    let head = quadrature::integrate(|v: f64| 1.0 / (1.0 + v.powf(inv_beta)), 0.0, head_end, 1e-16, 1e-14);
    if sigma <= 1.0 {
        return head;
    }
    let body = quadrature::integrate(
        |w: f64| beta * ((beta - 1.0) * w).exp() / (1.0 + (-w).exp()),
        0.0,
        sigma.ln(),
        1e-300,
        1e-14,
    );
    head + body
}

/// Logarithm of the `k₁` objective `σ^{−β(α−1)} J(σ)^α` at `σ = e^ℓ`.
pub fn k1_log_objective(ab: AlphaBeta, log_sigma: f64) -> f64 {
    let j = k1_inner_integral(ab.beta, log_sigma.exp());
    -ab.beta * (ab.alpha - 1.0) * log_sigma + ab.alpha * j.ln()
}

/// `k₁` together with the maximizing `σ`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct K1 {
    pub value: f64,
    /// `None` when the supremum is a limit rather than an attained maximum:
    /// at `β = 0` (by convention) and at `β = α` (approached as `σ → ∞`).
    pub sigma: Option<f64>,
    /// The best scan node sat on the edge of the `log σ ∈ [−14, 14]` bracket.
    pub at_bracket_edge: bool,
}

pub const K1_LOG_SIGMA_BRACKET: (f64, f64) = (-14.0, 14.0);
const K1_SCAN_STEP: f64 = 0.25;
const K1_TOL: f64 = 1e-10;

fn k1_cache() -> &'static RwLock<HashMap<(u64, u64), K1>> {
    static CACHE: OnceLock<RwLock<HashMap<(u64, u64), K1>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// `k₁ = sup_{σ>0} σ^{−β(α−1)} (∫₀^σ β s^{β−1}/(1+s) ds)^α`, with its
/// maximizer. Memoized on the exact bit patterns of `(α, β)`.
pub fn k1_with_maximizer(ab: AlphaBeta) -> Result<K1> {
    ab.require_alpha_above_one("k1")?;
    if ab.beta == 0.0 {
        return Ok(K1 {
            value: 1.0,
            sigma: None,
            at_bracket_edge: false,
        });
    }
    if ab.beta == ab.alpha {
        // J(σ)/σ^{α−1} increases to α/(α−1) as σ → ∞.
        return Ok(K1 {
            value: doob_factor(ab.alpha),
            sigma: None,
            at_bracket_edge: false,
        });
    }
    let key = (ab.alpha.to_bits(), ab.beta.to_bits());
    if let Some(hit) = k1_cache().read().expect("k1 cache poisoned").get(&key) {
        return Ok(*hit);
    }
    let (lo, hi) = K1_LOG_SIGMA_BRACKET;
    let found = optimize::scan_then_golden(|l| -k1_log_objective(ab, l), lo, hi, K1_SCAN_STEP, K1_TOL);
    let result = K1 {
        value: (-found.value).exp(),
        sigma: Some(found.arg.exp()),
        at_bracket_edge: found.at_edge,
    };
    k1_cache().write().expect("k1 cache poisoned").insert(key, result);
    Ok(result)
}

pub fn k1_const(ab: AlphaBeta) -> Result<f64> {
    k1_with_maximizer(ab).map(|k| k.value)
}

/// `σ*(d₀, σ²) = ½ inf_{d ≥ d₀} (d + σ²/d)`.
pub fn sigma_star(d0: f64, var: f64) -> Result<f64> {
    ensure_finite("d0", d0)?;
    ensure_finite("var", var)?;
    if d0 <= 0.0 {
        return domain(format!("d0 must be positive, got {d0}"));
    }
    if var < 0.0 {
        return domain(format!("variance must be nonnegative, got {var}"));
    }
    let sigma = var.sqrt();
    if sigma >= d0 {
        Ok(sigma)
    } else {
        Ok(0.5 * (d0 + var / d0))
    }
}

/// One-sided bound, conditional variance bound and the derived scale
/// `ŝ = (d + var/d)/2`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct StepScale {
    pub d: f64,
    pub variance: f64,
    pub s_hat: f64,
}

pub fn step_scale(d: f64, var: f64) -> Result<StepScale> {
    ensure_finite("d", d)?;
    ensure_finite("var", var)?;
    if d <= 0.0 {
        return domain(format!("d must be positive, got {d}"));
    }
    if var < 0.0 {
        return domain(format!("variance must be nonnegative, got {var}"));
    }
    Ok(StepScale {
        d,
        variance: var,
        s_hat: 0.5 * (d + var / d),
    })
}

/// Per-step scales and their Euclidean norm.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ScaleVector {
    pub entries: Vec<f64>,
    pub aggregate: f64,
}

/// `s = sqrt(s₁² + … + s_n²)`.
pub fn aggregate(scales: &[f64]) -> Result<ScaleVector> {
    if scales.is_empty() {
        return domain("scale list must be non-empty");
    }
    for (i, &s) in scales.iter().enumerate() {
        if !(s.is_finite() && s > 0.0) {
            return domain(format!("scale[{i}] must be positive and finite, got {s}"));
        }
    }
    Ok(ScaleVector {
        entries: scales.to_vec(),
        aggregate: euclidean_norm(scales),
    })
}

/// Order-independent Euclidean norm: squares are summed in sorted order.
pub(crate) fn euclidean_norm(xs: &[f64]) -> f64 {
    let mut squares: Vec<f64> = xs.iter().map(|x| x * x).collect();
    squares.sort_by(f64::total_cmp);
    crate::sum::sum(squares).sqrt()
}

/// Largest variance of a mean-zero law supported on `[c, d]`, `c < 0 < d`.
pub fn variance_cap(c: f64, d: f64) -> Result<f64> {
    ensure_finite("c", c)?;
    ensure_finite("d", d)?;
    if !(c < 0.0 && d > 0.0) {
        return domain(format!("need c < 0 < d, got c = {c}, d = {d}"));
    }
    Ok(-c * d)
}
