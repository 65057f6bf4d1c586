//! Standard normal density, upper tail, Mills ratio and the truncated power
//! moments `m_α(t) = E(Z − t)₊^α` for integer orders `0..=5`.
//!
//! Two evaluation routes are used for the moments:
//!
//! * for `t ≤ 3` the forward recursion `m_α = (α−1)·m_{α−2} − t·m_{α−1}`
//!   started from `m₀ = Ψ(t)` and `m₁ = φ(t) − tΨ(t)`;
//! * for `t > 3` the scaled moments `I_α(t) = m_α(t)/φ(t)` are obtained as a
//!   product of tails of the Laplace continued fraction of the Mills ratio.
//!   Every partial quotient is positive, so nothing cancels.
//!
//! The forward recursion loses roughly `t^{2α}/α!` in relative accuracy for
//! positive `t`, which is why it is not used beyond the threshold.

use crate::error::{domain, ensure_finite, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Above this point the upper tail is computed as `φ(t)·mills(t)` with the
/// continued-fraction Mills ratio.
pub const MILLS_CF_THRESHOLD: f64 = 8.0;

/// Above this point truncated moments use the continued-fraction product.
pub const MOMENT_CF_THRESHOLD: f64 = 3.0;

/// Above this point `closed_form_r` leaves the `Pφ − QΨ` form, whose two
/// terms cancel, for the continued-fraction form of `φ·(P − Q·mills)`.
pub const CLOSED_FORM_SWITCH: f64 = 4.0;

/// Highest supported moment order.
pub const MAX_ORDER: u32 = 5;

/// Integer moment order in `0..=5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MomentOrder(u32);

impl MomentOrder {
    pub const FIVE: MomentOrder = MomentOrder(5);

    pub fn new(alpha: u32) -> Result<Self> {
        if alpha <= MAX_ORDER {
            Ok(MomentOrder(alpha))
        } else {
            domain(format!("moment order must be in 0..=5, got {alpha}"))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for MomentOrder {
    type Error = crate::Error;

    fn try_from(alpha: u32) -> Result<Self> {
        MomentOrder::new(alpha)
    }
}

/// A kernel result with an a-priori absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub abs_error_estimate: f64,
}

/// Standard normal density.
pub fn phi(t: f64) -> Result<f64> {
    ensure_finite("t", t)?;
    Ok(density(t))
}

#[inline]
fn density(t: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * t * t).exp()
}

/// `Ψ(t) = P(Z ≥ t)`.
pub fn upper_tail(t: f64) -> Result<f64> {
    ensure_finite("t", t)?;
    Ok(tail(t))
}

#[inline]
fn tail(t: f64) -> f64 {
    if t > MILLS_CF_THRESHOLD {
        density(t) * mills_cf(t)
    } else {
        0.5 * libm::erfc(t * std::f64::consts::FRAC_1_SQRT_2)
    }
}

/// Mills ratio `Ψ(t)/φ(t)`.
pub fn mills_ratio(t: f64) -> Result<f64> {
    ensure_finite("t", t)?;
    if t > MILLS_CF_THRESHOLD {
        return Ok(mills_cf(t));
    }
    // erfcx keeps the ratio finite for very negative t, where φ underflows.
    Ok(0.5 * erfcx(t * std::f64::consts::FRAC_1_SQRT_2) / INV_SQRT_2PI)
}

/// Scaled complementary error function `exp(x²)·erfc(x)` for `x ≤ 8/√2`.
/// Overflows to infinity once `x² > 709.78`.
fn erfcx(x: f64) -> f64 {
    (x * x).exp() * libm::erfc(x)
}

fn cf_depth(t: f64) -> usize {
    40 + (4000.0 / (t * t)) as usize
}

/// Tail `T_k = k/(t + (k+1)/(t + …))` of the Laplace continued fraction.
fn cf_tail_from(t: f64, k: usize) -> f64 {
    let depth = cf_depth(t).max(k + 1);
    let mut tail = 0.0;
    for j in (k..=depth).rev() {
        tail = j as f64 / (t + tail);
    }
    tail
}

fn mills_cf(t: f64) -> f64 {
    1.0 / (t + cf_tail_from(t, 1))
}

/// `I_α(t) = m_α(t)/φ(t)` for `α = 0..=5` via continued-fraction tails.
/// Valid (and accurate) for `t > 0`; intended for `t > 3`.
fn scaled_moments_cf(t: f64) -> [f64; 6] {
    let mut ratios = [0.0; 6];
    let mut tail = cf_tail_from(t, 6);
    for k in (1..=5).rev() {
        tail = k as f64 / (t + tail);
        ratios[k] = tail;
    }
    let mut out = [0.0; 6];
    out[0] = 1.0 / (t + ratios[1]);
    for k in 1..=5 {
        out[k] = out[k - 1] * ratios[k];
    }
    out
}

fn moments_forward(t: f64) -> [f64; 6] {
    let psi = tail(t);
    let dens = density(t);
    let mut m = [0.0; 6];
    m[0] = psi;
    m[1] = dens - t * psi;
    for a in 2..=5 {
        m[a] = (a as f64 - 1.0) * m[a - 2] - t * m[a - 1];
    }
    m
}

/// All truncated moments `m_0(t), …, m_5(t)` at once.
pub fn truncated_moments(t: f64) -> Result<[f64; 6]> {
    ensure_finite("t", t)?;
    Ok(moments_all(t))
}

fn moments_all(t: f64) -> [f64; 6] {
    if t > MOMENT_CF_THRESHOLD {
        let dens = density(t);
        scaled_moments_cf(t).map(|v| dens * v)
    } else {
        moments_forward(t)
    }
}

/// `m_α(t) = E(Z − t)₊^α`.
pub fn truncated_moment(alpha: MomentOrder, t: f64) -> Result<f64> {
    ensure_finite("t", t)?;
    Ok(moments_all(t)[alpha.get() as usize])
}

/// Like [`truncated_moment`], tagged with an absolute error estimate.
pub fn truncated_moment_value(alpha: MomentOrder, t: f64) -> Result<KernelValue> {
    let value = truncated_moment(alpha, t)?;
    let rel = if t > MOMENT_CF_THRESHOLD { 1e-14 } else { 1e-12 };
    Ok(KernelValue {
        value,
        abs_error_estimate: rel * value.abs(),
    })
}

/// `P(t) = 8 + 9t² + t⁴`.
pub fn poly_p(t: f64) -> f64 {
    let t2 = t * t;
    8.0 + t2 * (9.0 + t2)
}

/// `Q(t) = t(15 + 10t² + t⁴)`.
pub fn poly_q(t: f64) -> f64 {
    let t2 = t * t;
    t * (15.0 + t2 * (10.0 + t2))
}

/// `R(t) = P(t)φ(t) − Q(t)Ψ(t)`, the fifth truncated moment in closed form.
pub fn closed_form_r(t: f64) -> Result<f64> {
    ensure_finite("t", t)?;
    if t > CLOSED_FORM_SWITCH {
        Ok(closed_form_r_mills(t))
    } else {
        Ok(poly_p(t) * density(t) - poly_q(t) * tail(t))
    }
}

/// The Mills-ratio branch `φ(t)·(P(t) − Q(t)·mills(t))`.
///
/// Past `t ≈ 37.5` the result is subnormal and loses relative precision;
/// [`closed_form_r_bracket`] stays accurate there.
pub fn closed_form_r_mills(t: f64) -> f64 {
    density(t) * closed_form_r_bracket(t)
}

/// `R(t)/φ(t) = P(t) − Q(t)·mills(t)` for `t > 0`, with the bracket expanded
/// as a product of continued-fraction tails so that no terms cancel.
pub fn closed_form_r_bracket(t: f64) -> f64 {
    scaled_moments_cf(t)[5]
}

/// `E(sZ − t)₊^α = s^α·m_α(t/s)`.
pub fn scaled_moment(s: f64, t: f64, alpha: MomentOrder) -> Result<f64> {
    ensure_finite("s", s)?;
    ensure_finite("t", t)?;
    if s <= 0.0 {
        return domain(format!("scale must be positive, got {s}"));
    }
    Ok(s.powi(alpha.get() as i32) * moments_all(t / s)[alpha.get() as usize])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ord(a: u32) -> MomentOrder {
        MomentOrder::new(a).unwrap()
    }

    #[test]
    fn density_values() {
        assert_relative_eq!(phi(0.0).unwrap(), 0.398_942_280_401_432_7, max_relative = 1e-15);
        assert_relative_eq!(phi(3.0).unwrap(), 0.004_431_848_411_938_007, max_relative = 1e-14);
        assert_eq!(phi(1.7).unwrap(), phi(-1.7).unwrap());
        assert!(phi(f64::NAN).is_err());
    }

    #[test]
    fn tail_values() {
        assert_eq!(upper_tail(0.0).unwrap(), 0.5);
        assert_relative_eq!(upper_tail(3.0).unwrap(), 0.001_349_898_031_630_094_5, max_relative = 1e-13);
        let s = upper_tail(2.3).unwrap() + upper_tail(-2.3).unwrap();
        assert_relative_eq!(s, 1.0, max_relative = 1e-15);
        assert!(upper_tail(f64::INFINITY).is_err());
        assert_eq!(upper_tail(60.0).unwrap(), 0.0);
    }

    #[test]
    fn tail_branches_meet_at_threshold() {
        let t = MILLS_CF_THRESHOLD;
        let erfc_side = 0.5 * libm::erfc(t * std::f64::consts::FRAC_1_SQRT_2);
        let cf_side = density(t) * mills_cf(t);
        assert_relative_eq!(erfc_side, cf_side, max_relative = 1e-13);
    }

    #[test]
    fn mills_values() {
        assert_relative_eq!(mills_ratio(0.0).unwrap(), 1.253_314_137_315_500_3, max_relative = 1e-14);
        assert_relative_eq!(mills_ratio(10.0).unwrap(), 0.099_028_596_471_731_92, max_relative = 1e-13);
        let t = 4.0;
        assert_relative_eq!(
            mills_ratio(t).unwrap() * phi(t).unwrap(),
            upper_tail(t).unwrap(),
            max_relative = 1e-13
        );
        // φ underflows far left, the ratio does not.
        assert!(mills_ratio(-30.0).unwrap().is_finite());
    }

    #[test]
    fn moment_values() {
        assert_eq!(truncated_moment(ord(0), 1.0).unwrap(), upper_tail(1.0).unwrap());
        assert_relative_eq!(truncated_moment(ord(5), 0.0).unwrap(), 3.191_538_243_211_461_4, max_relative = 1e-13);
        assert_relative_eq!(truncated_moment(ord(5), -3.0).unwrap(), 558.000_171_128_379_9, max_relative = 1e-13);
        assert!(MomentOrder::new(6).is_err());
    }

    #[test]
    fn moment_routes_agree_near_threshold() {
        for &t in &[2.0, 2.5, 3.0, 3.5] {
            let fwd = moments_forward(t);
            let dens = density(t);
            let cf = scaled_moments_cf(t).map(|v| v * dens);
            for a in 0..6 {
                assert_relative_eq!(fwd[a], cf[a], max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn closed_form_values() {
        assert_relative_eq!(closed_form_r(0.0).unwrap(), 8.0 * phi(0.0).unwrap(), max_relative = 1e-15);
        assert_relative_eq!(closed_form_r(-3.0).unwrap(), 558.000_171_128_379_9, max_relative = 1e-13);
        let t = 1.5;
        let diff = closed_form_r(t).unwrap() - truncated_moment(ord(5), t).unwrap();
        assert!(diff.abs() < 1e-10);
        assert_eq!(poly_p(-3.0), 170.0);
        assert_eq!(poly_q(-3.0), -558.0);
    }

    #[test]
    fn scaled_moment_values() {
        assert_eq!(scaled_moment(1.0, 0.4, ord(3)).unwrap(), truncated_moment(ord(3), 0.4).unwrap());
        assert_relative_eq!(scaled_moment(2.0, 0.0, ord(5)).unwrap(), 102.129_223_782_766_77, max_relative = 1e-13);
        assert_eq!(scaled_moment(3.0, 6.0, ord(0)).unwrap(), upper_tail(2.0).unwrap());
        assert!(scaled_moment(0.0, 1.0, ord(2)).is_err());
        assert!(scaled_moment(-1.0, 1.0, ord(2)).is_err());
    }

    #[test]
    fn value_carries_error_estimate() {
        let v = truncated_moment_value(ord(2), 0.5).unwrap();
        assert!(v.abs_error_estimate >= 0.0 && v.abs_error_estimate < 1e-10);
    }
}
