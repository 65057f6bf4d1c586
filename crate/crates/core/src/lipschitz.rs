//! Concentration of separately Lipschitz functions `Y = g(X₁, …, X_n)` of
//! independent discrete variables.
//!
//! Everything here is exact enumeration over the product of the supports.
//! The conditional expectations `E[g | X₁..X_k]` are tabulated once for every
//! `k`; the Doob martingale differences
//!
//! ```text
//! Ξ_i(x₁..x_i) = E g(x₁..x_i, X_{i+1}..) − E g(x₁..x_{i−1}, X_i, X_{i+1}..)
//! ```
//!
//! are then differences of adjacent tables.

use serde::{Deserialize, Serialize};

use crate::constants::{aggregate, euclidean_norm, ScaleVector};
use crate::error::{domain, Error, Result};
use crate::sum::Neumaier;
use crate::tail_bounds::{c50, BoundQuery};
use crate::normal_kernel::upper_tail;

/// Maximal number of product states enumerated.
pub const ENUMERATION_BUDGET: usize = 1_000_000;

const PROB_SUM_TOL: f64 = 1e-12;

/// A finitely supported law on distinct points.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteVariable<P> {
    support: Vec<P>,
    probs: Vec<f64>,
}

impl<P: PartialEq> DiscreteVariable<P> {
    pub fn new(support: Vec<P>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return domain("support must be non-empty");
        }
        if support.len() != probs.len() {
            return domain(format!(
                "support has {} points but {} probabilities were given",
                support.len(),
                probs.len()
            ));
        }
        for (j, &p) in probs.iter().enumerate() {
            if !(p.is_finite() && p >= 0.0) {
                return domain(format!("probs[{j}] = {p} is not a nonnegative number"));
            }
        }
        let total = crate::sum::sum(probs.iter().copied());
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return domain(format!("probabilities sum to {total}, not 1"));
        }
        for a in 0..support.len() {
            for b in 0..a {
                if support[a] == support[b] {
                    return domain(format!("support points {b} and {a} coincide"));
                }
            }
        }
        Ok(DiscreteVariable { support, probs })
    }
}

impl<P> DiscreteVariable<P> {
    pub fn support(&self) -> &[P] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

impl DiscreteVariable<f64> {
    pub fn mean(&self) -> f64 {
        crate::sum::sum(self.support.iter().zip(&self.probs).map(|(x, p)| x * p))
    }

    /// `E X² − (E X)²`, clamped at 0.
    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        crate::sum::sum(self.support.iter().zip(&self.probs).map(|(x, p)| p * (x - mu) * (x - mu))).max(0.0)
    }

    /// Symmetric ±1 signs.
    pub fn rademacher() -> Self {
        DiscreteVariable {
            support: vec![-1.0, 1.0],
            probs: vec![0.5, 0.5],
        }
    }
}

/// A coordinate value: a number, a finite-dimensional vector, or an opaque
/// token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Scalar(f64),
    Vector(Vec<f64>),
    Token(String),
}

impl Point {
    fn as_slice(&self) -> Option<&[f64]> {
        match self {
            Point::Scalar(x) => Some(std::slice::from_ref(x)),
            Point::Vector(v) => Some(v),
            Point::Token(_) => None,
        }
    }
}

/// Componentwise mean of a numeric variable; `None` for tokens or ragged
/// vectors.
pub fn point_mean(var: &DiscreteVariable<Point>) -> Option<Point> {
    let dim = var.support[0].as_slice()?.len();
    let mut acc = vec![Neumaier::default(); dim];
    for (pt, &p) in var.support.iter().zip(&var.probs) {
        let xs = pt.as_slice()?;
        if xs.len() != dim {
            return None;
        }
        for (a, x) in acc.iter_mut().zip(xs) {
            a.add(p * x);
        }
    }
    let mean: Vec<f64> = acc.iter().map(Neumaier::value).collect();
    match &var.support[0] {
        Point::Scalar(_) => Some(Point::Scalar(mean[0])),
        _ => Some(Point::Vector(mean)),
    }
}

/// Named test functions for corpus files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinG {
    /// `x₁ + … + x_n`.
    Sum,
    /// `|x₁ + … + x_n|`.
    AbsSum,
    /// `max(x₁, …, x_n)`.
    Max,
    /// `‖x₁ + … + x_n‖₁` for vector (or scalar) coordinates.
    #[serde(rename = "norm1-of-sums")]
    Norm1OfSums,
}

impl BuiltinG {
    pub fn name(self) -> &'static str {
        match self {
            BuiltinG::Sum => "sum",
            BuiltinG::AbsSum => "abs-sum",
            BuiltinG::Max => "max",
            BuiltinG::Norm1OfSums => "norm1-of-sums",
        }
    }

    /// Checks that every support point is of a kind this function accepts.
    /// Returns the offending `(variable, point)` on failure.
    pub fn check_points(self, vars: &[DiscreteVariable<Point>]) -> std::result::Result<(), (usize, usize, String)> {
        let mut dim = None;
        for (i, v) in vars.iter().enumerate() {
            for (j, pt) in v.support.iter().enumerate() {
                let bad = |msg: &str| Err((i, j, msg.to_string()));
                match (self, pt) {
                    (_, Point::Token(_)) => return bad("builtin functions need numeric points"),
                    (BuiltinG::Norm1OfSums, _) => {
                        let len = pt.as_slice().map(<[f64]>::len).unwrap_or(0);
                        if *dim.get_or_insert(len) != len {
                            return bad("all vectors must share one dimension");
                        }
                    }
                    (_, Point::Vector(_)) => return bad("this function takes scalar points"),
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn eval(self, xs: &[&Point]) -> f64 {
        let scalar = |p: &Point| match p {
            Point::Scalar(x) => *x,
            _ => f64::NAN,
        };
        match self {
            BuiltinG::Sum => crate::sum::sum(xs.iter().map(|p| scalar(p))),
            BuiltinG::AbsSum => crate::sum::sum(xs.iter().map(|p| scalar(p))).abs(),
            BuiltinG::Max => xs.iter().map(|p| scalar(p)).fold(f64::NEG_INFINITY, f64::max),
            BuiltinG::Norm1OfSums => {
                let dim = xs.first().and_then(|p| p.as_slice()).map_or(0, <[f64]>::len);
                (0..dim)
                    .map(|c| crate::sum::sum(xs.iter().map(|p| p.as_slice().map_or(f64::NAN, |v| v[c]))).abs())
                    .sum()
            }
        }
    }
}

/// Per-coordinate moduli `sup ρ_i`, half-moduli `r_i`, and the radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzProfile {
    pub rho_sups: Vec<f64>,
    pub radii: Vec<f64>,
    pub radius: f64,
}

/// `r_i = sup ρ_i / 2`, `r = ‖(r_i)‖₂`.
pub fn profile_radius(rho_sups: &[f64]) -> Result<LipschitzProfile> {
    if rho_sups.is_empty() {
        return domain("rho_sups must be non-empty");
    }
    for (i, &r) in rho_sups.iter().enumerate() {
        if !(r.is_finite() && r >= 0.0) {
            return domain(format!("rho_sups[{i}] = {r} must be finite and nonnegative"));
        }
    }
    let radii: Vec<f64> = rho_sups.iter().map(|r| r / 2.0).collect();
    Ok(LipschitzProfile {
        rho_sups: rho_sups.to_vec(),
        radius: euclidean_norm(&radii),
        radii,
    })
}

/// The plain and the tighter concentration tail bounds at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationTail {
    /// `min(1, c₅,₀ Ψ(x/r))`.
    pub plain: f64,
    /// `min(1, exp(−x²/2r²), c₅,₀ Ψ(x/r))`.
    pub tighter: f64,
}

/// Bounds on `P(Y − EY ≥ x)` for radius (or aggregate scale) `radius`.
pub fn concentration_tail(radius: f64, x: f64) -> Result<ConcentrationTail> {
    let q = BoundQuery::new(x, radius)?;
    let plain = (c50() * upper_tail(q.ratio())?).min(1.0);
    Ok(ConcentrationTail {
        plain,
        tighter: plain.min(crate::tail_bounds::hoeffding_bound(q)),
    })
}

/// `min over support points x_i of E ρ(X, x_i)²`.
pub fn rho_second_moment_bound<P, F>(rho: F, var: &DiscreteVariable<P>) -> Result<f64>
where
    F: Fn(&P, &P) -> f64,
{
    let mut best = f64::INFINITY;
    for anchor in &var.support {
        let mut acc = Neumaier::default();
        for (x, &p) in var.support.iter().zip(&var.probs) {
            let r = rho(x, anchor);
            if !(r.is_finite() && r >= 0.0) {
                return domain(format!("rho returned {r}; it must be finite and nonnegative"));
            }
            acc.add(p * r * r);
        }
        best = best.min(acc.value());
    }
    Ok(best)
}

/// `s_i = (d_i + m_i/d_i)/2` aggregated in Euclidean norm.
pub fn banach_scales(d: &[f64], second_moments: &[f64]) -> Result<ScaleVector> {
    if d.len() != second_moments.len() {
        return domain(format!(
            "{} bounds but {} second moments",
            d.len(),
            second_moments.len()
        ));
    }
    let mut s = Vec::with_capacity(d.len());
    for (i, (&di, &mi)) in d.iter().zip(second_moments).enumerate() {
        if !(di.is_finite() && di > 0.0) {
            return domain(format!("d[{i}] = {di} must be positive"));
        }
        if !(mi.is_finite() && mi >= 0.0) {
            return domain(format!("second_moments[{i}] = {mi} must be nonnegative"));
        }
        s.push(0.5 * (di + mi / di));
    }
    aggregate(&s)
}

/// Results of the exact `Ξ_i` analysis for one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiAnalysis {
    /// Zero-based coordinate index.
    pub coordinate: usize,
    /// `sup Ξ_i` over prefixes and values, the tightest constant `D_{i−1}`.
    pub d_sup: f64,
    /// `sup` over prefixes of `E Ξ_i(prefix, X_i)²`.
    pub second_moment_sup: f64,
    /// Relaxed half-modulus `r̂_i`.
    pub r_hat: f64,
    /// `(d_sup + second_moment_sup/d_sup)/2`, or 0 when `Ξ_i ≤ 0`.
    pub s_i: f64,
    /// Half the smallest admissible modulus, `r_i`.
    pub r_i: f64,
    /// `max |E Ξ_i(prefix, X_i)|` over prefixes; zero up to rounding.
    pub max_abs_mean: f64,
}

/// `g` tabulated on the product of the supports, with all conditional
/// expectation tables.
pub struct EnumeratedFunction<'a, P> {
    vars: &'a [DiscreteVariable<P>],
    g: Box<dyn Fn(&[&P]) -> f64 + Sync + 'a>,
    /// `cond[k]` has one entry per prefix `(x₁..x_k)`, last coordinate
    /// fastest; `cond[n]` is the table of `g` itself.
    cond: Vec<Vec<f64>>,
}

impl<'a, P> EnumeratedFunction<'a, P> {
    pub fn new<G>(g: G, vars: &'a [DiscreteVariable<P>]) -> Result<Self>
    where
        G: Fn(&[&P]) -> f64 + Sync + 'a,
    {
        if vars.is_empty() {
            return domain("at least one variable is required");
        }
        let mut states: usize = 1;
        for v in vars {
            states = states
                .checked_mul(v.len())
                .filter(|&s| s <= ENUMERATION_BUDGET)
                .ok_or_else(|| Error::Range(format!("product of support sizes exceeds {ENUMERATION_BUDGET}")))?;
        }
        let n = vars.len();
        let mut table = Vec::with_capacity(states);
        let mut idx = vec![0usize; n];
        for _ in 0..states {
            let pts: Vec<&P> = idx.iter().zip(vars).map(|(&j, v)| &v.support[j]).collect();
            let value = g(&pts);
            if !value.is_finite() {
                return domain(format!("g is not finite at support indices {idx:?}"));
            }
            table.push(value);
            for k in (0..n).rev() {
                idx[k] += 1;
                if idx[k] < vars[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        let mut cond = vec![Vec::new(); n + 1];
        cond[n] = table;
        for k in (0..n).rev() {
            let m = vars[k].len();
            let probs = &vars[k].probs;
            cond[k] = cond[k + 1]
                .chunks_exact(m)
                .map(|row| crate::sum::sum(row.iter().zip(probs).map(|(v, p)| v * p)))
                .collect();
        }
        Ok(EnumeratedFunction {
            vars,
            g: Box::new(g),
            cond,
        })
    }

    pub fn n(&self) -> usize {
        self.vars.len()
    }

    /// `E Y`.
    pub fn mean(&self) -> f64 {
        self.cond[0][0]
    }

    /// Exact law of `Y − EY`: sorted distinct deviations with probabilities.
    pub fn centered_law(&self) -> Vec<(f64, f64)> {
        let n = self.n();
        let mean = self.mean();
        let mut weights = vec![1.0];
        for v in self.vars {
            weights = weights.iter().flat_map(|w| v.probs.iter().map(move |p| w * p)).collect();
        }
        debug_assert_eq!(weights.len(), self.cond[n].len());
        let mut pairs: Vec<(f64, f64)> = self.cond[n].iter().map(|y| y - mean).zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut law: Vec<(f64, Neumaier)> = Vec::new();
        for (y, p) in pairs {
            match law.last_mut() {
                Some((last, acc)) if *last == y => acc.add(p),
                _ => {
                    let mut acc = Neumaier::default();
                    acc.add(p);
                    law.push((y, acc));
                }
            }
        }
        law.into_iter().map(|(y, acc)| (y, acc.value())).collect()
    }

    fn strides(&self, i: usize) -> (usize, usize, usize) {
        let prefixes: usize = self.vars[..i].iter().map(DiscreteVariable::len).product();
        let suffix: usize = self.vars[i + 1..].iter().map(DiscreteVariable::len).product();
        (prefixes, self.vars[i].len(), suffix)
    }

    /// Exact `Ξ_i` analysis for zero-based coordinate `i`.
    pub fn xi(&self, i: usize) -> Result<XiAnalysis> {
        if i >= self.n() {
            return domain(format!("coordinate {i} out of range for {} variables", self.n()));
        }
        let (prefixes, m, suffix) = self.strides(i);
        let before = &self.cond[i];
        let after = &self.cond[i + 1];
        let probs = &self.vars[i].probs;
        let mut d_sup = f64::NEG_INFINITY;
        let mut m2_sup: f64 = 0.0;
        let mut spread_sup: f64 = 0.0;
        let mut max_abs_mean: f64 = 0.0;
        for p in 0..prefixes {
            let row = &after[p * m..(p + 1) * m];
            let base = before[p];
            let mut m1 = Neumaier::default();
            let mut m2 = Neumaier::default();
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (&v, &q) in row.iter().zip(probs) {
                let xi = v - base;
                d_sup = d_sup.max(xi);
                m1.add(q * xi);
                m2.add(q * xi * xi);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            m2_sup = m2_sup.max(m2.value());
            spread_sup = spread_sup.max(hi - lo);
            max_abs_mean = max_abs_mean.max(m1.value().abs());
        }
        // r_i from the g table: spread along coordinate i for every other
        // configuration.
        let table = &self.cond[self.n()];
        let mut rho_sup: f64 = 0.0;
        for p in 0..prefixes {
            for q in 0..suffix {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for j in 0..m {
                    let v = table[(p * m + j) * suffix + q];
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                rho_sup = rho_sup.max(hi - lo);
            }
        }
        let s_i = if d_sup > 0.0 { 0.5 * (d_sup + m2_sup / d_sup) } else { 0.0 };
        Ok(XiAnalysis {
            coordinate: i,
            d_sup,
            second_moment_sup: m2_sup,
            r_hat: 0.5 * spread_sup,
            s_i,
            r_i: 0.5 * rho_sup,
            max_abs_mean,
        })
    }

    pub fn xi_all(&self) -> Result<Vec<XiAnalysis>> {
        (0..self.n()).map(|i| self.xi(i)).collect()
    }

    /// `Ξ_i(prefix, x_j)` for every prefix and support index `j`, laid out
    /// prefix-major.
    pub fn xi_values(&self, i: usize) -> Vec<f64> {
        let (prefixes, m, _) = self.strides(i);
        let (before, after) = (&self.cond[i], &self.cond[i + 1]);
        (0..prefixes * m).map(|k| after[k] - before[k / m]).collect()
    }

    /// Smallest modulus `ρ_i(a, b) = sup |g(…, a, …) − g(…, b, …)|` over the
    /// supports of the other coordinates; `a` and `b` need not be support
    /// points.
    pub fn smallest_rho(&self, i: usize, a: &P, b: &P) -> f64 {
        let n = self.n();
        let mut idx = vec![0usize; n];
        let mut sup: f64 = 0.0;
        loop {
            let mut pa: Vec<&P> = idx.iter().zip(self.vars).map(|(&j, v)| &v.support[j]).collect();
            let mut pb = pa.clone();
            pa[i] = a;
            pb[i] = b;
            sup = sup.max(((self.g)(&pa) - (self.g)(&pb)).abs());
            // Advance every coordinate except i.
            let mut k = n;
            loop {
                if k == 0 {
                    return sup;
                }
                k -= 1;
                if k == i {
                    continue;
                }
                idx[k] += 1;
                if idx[k] < self.vars[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

/// One-shot `Ξ_i` analysis.
pub fn exact_xi_analysis<P, G>(g: G, vars: &[DiscreteVariable<P>], i: usize) -> Result<XiAnalysis>
where
    G: Fn(&[&P]) -> f64 + Sync,
{
    EnumeratedFunction::new(g, vars)?.xi(i)
}

/// Verdicts of the end-to-end concentration checks on one function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub mean: f64,
    pub xi: Vec<XiAnalysis>,
    /// Radius from the smallest moduli, `r = ‖(r_i)‖₂`.
    pub radius: f64,
    /// Radius from the relaxed moduli, `‖(r̂_i)‖₂`.
    pub radius_hat: f64,
    /// Aggregate `s = ‖(s_i)‖₂` from the `Ξ` analysis.
    pub s: f64,
    pub max_abs_xi_mean: f64,
    pub r_hat_within_r: bool,
    /// `None` when the convexity check does not apply (token coordinates).
    pub convex_bound_holds: Option<bool>,
    pub lattice_points: usize,
    /// Minimal `bound − P(Y − EY ≥ x)` over the lattice for the radius bound.
    pub min_slack_radius: f64,
    /// Same for the `Ξ`-scale bound.
    pub min_slack_s: f64,
    pub passed: bool,
}

const MEAN_ZERO_TOL: f64 = 1e-12;
const DOMINATION_TOL: f64 = 1e-10;

fn tail_bound_or_indicator(scale: f64, x: f64) -> f64 {
    if scale > 0.0 {
        concentration_tail(scale, x).map(|c| c.tighter).unwrap_or(1.0)
    } else if x <= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Runs every concentration check on a corpus entry.
///
/// `convex` enables the pointwise `Ξ_i ≤ ρ_i(x_i, E X_i)` check, which needs
/// `g` convex in each argument.
pub fn analyze_corpus_entry(g: BuiltinG, vars: &[DiscreteVariable<Point>], convex: bool) -> Result<LipschitzReport> {
    g.check_points(vars).map_err(|(i, j, msg)| Error::Schema {
        path: format!("variables[{i}].support[{j}]"),
        message: msg,
    })?;
    let f = EnumeratedFunction::new(move |xs: &[&Point]| g.eval(xs), vars)?;
    let xi = f.xi_all()?;
    let r_i: Vec<f64> = xi.iter().map(|a| a.r_i).collect();
    let r_hat: Vec<f64> = xi.iter().map(|a| a.r_hat).collect();
    let s_i: Vec<f64> = xi.iter().map(|a| a.s_i).collect();
    let radius = euclidean_norm(&r_i);
    let radius_hat = euclidean_norm(&r_hat);
    let s = euclidean_norm(&s_i);
    let max_abs_xi_mean = xi.iter().map(|a| a.max_abs_mean).fold(0.0, f64::max);
    let r_hat_within_r = xi.iter().all(|a| a.r_hat <= a.r_i + 1e-12);

    let convex_bound_holds = if convex {
        let mut holds = true;
        for i in 0..f.n() {
            let Some(mean_point) = point_mean(&vars[i]) else {
                return Ok(finish(f.mean(), xi, radius, radius_hat, s, max_abs_xi_mean, r_hat_within_r, None, &f));
            };
            let values = f.xi_values(i);
            let m = vars[i].len();
            let rho: Vec<f64> = vars[i].support.iter().map(|x| f.smallest_rho(i, x, &mean_point)).collect();
            for (k, v) in values.iter().enumerate() {
                if *v > rho[k % m] + 1e-12 {
                    holds = false;
                }
            }
        }
        Some(holds)
    } else {
        None
    };
    Ok(finish(f.mean(), xi, radius, radius_hat, s, max_abs_xi_mean, r_hat_within_r, convex_bound_holds, &f))
}

#[allow(clippy::too_many_arguments)]
fn finish<P>(
    mean: f64,
    xi: Vec<XiAnalysis>,
    radius: f64,
    radius_hat: f64,
    s: f64,
    max_abs_xi_mean: f64,
    r_hat_within_r: bool,
    convex_bound_holds: Option<bool>,
    f: &EnumeratedFunction<'_, P>,
) -> LipschitzReport {
    let law = f.centered_law();
    // Suffix sums give P(Y − EY ≥ x) at every lattice point.
    let mut tails = vec![0.0; law.len()];
    let mut acc = Neumaier::default();
    for k in (0..law.len()).rev() {
        acc.add(law[k].1);
        tails[k] = acc.value();
    }
    let mut min_slack_radius = f64::INFINITY;
    let mut min_slack_s = f64::INFINITY;
    let mut dominated = true;
    for ((x, _), &p) in law.iter().zip(&tails) {
        let by_r = tail_bound_or_indicator(radius, *x);
        let by_s = tail_bound_or_indicator(s, *x);
        min_slack_radius = min_slack_radius.min(by_r - p);
        min_slack_s = min_slack_s.min(by_s - p);
        if p > by_r + DOMINATION_TOL * by_r.max(1.0) || p > by_s + DOMINATION_TOL * by_s.max(1.0) {
            dominated = false;
        }
    }
    let passed = dominated && r_hat_within_r && max_abs_xi_mean <= MEAN_ZERO_TOL && convex_bound_holds != Some(false);
    LipschitzReport {
        mean,
        xi,
        radius,
        radius_hat,
        s,
        max_abs_xi_mean,
        r_hat_within_r,
        convex_bound_holds,
        lattice_points: law.len(),
        min_slack_radius,
        min_slack_s,
        passed,
    }
}
