//! Constructive (super)martingale models with discrete increments: exact
//! enumeration and Monte Carlo of `S_n` and `M_n = max_{0≤k≤n} S_k`, and
//! verifiers for every domination inequality of the crate.
//!
//! A model is a list of steps. Each step has a default branch and optional
//! overrides selected by the history of the path (indices of the support
//! points drawn so far, or the current partial sum), so adapted brackets
//! such as "`D_{i−1}` depends on the sign of `S_{i−1}`" are expressible.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constants::{doob_factor, euclidean_norm, AlphaBeta};
use crate::error::{domain, ensure_finite, Error, Result};
use crate::lipschitz::DiscreteVariable;
use crate::normal_kernel::{closed_form_r, scaled_moment, MomentOrder};
use crate::sum::Neumaier;
use crate::tail_bounds::{
    combined_bound, maximal_moment_bound, maximal_tail_bound, positive_power, snapshot_moment_bound, BoundQuery,
};

/// Maximal number of positive-probability paths enumerated.
pub const PATH_BUDGET: usize = 1 << 20;

/// Minimal number of Monte Carlo paths.
pub const MIN_MC_PATHS: usize = 10_000;

/// Two-sided standard normal quantile for 99% confidence.
pub const Z_99: f64 = 2.575_829_303_548_901;

const MEAN_TOL: f64 = 1e-12;
const CONDITION_TOL: f64 = 1e-12;
const DOMINATION_TOL: f64 = 1e-10;
const LEMMA_TOL: f64 = 1e-9;
const MAX_RECORDED_FAILURES: usize = 100;

/// The extremal mean-zero law with range 2: `2r` with probability `1 − r`
/// and `2r − 2` with probability `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoPointIncrement {
    pub r: f64,
    pub hi: f64,
    pub lo: f64,
}

pub fn two_point_increment(r: f64) -> Result<TwoPointIncrement> {
    if !(0.0..=1.0).contains(&r) {
        return domain(format!("r must lie in [0, 1], got {r}"));
    }
    Ok(TwoPointIncrement {
        r,
        hi: 2.0 * r,
        lo: 2.0 * r - 2.0,
    })
}

impl TwoPointIncrement {
    pub fn law(&self) -> DiscreteVariable<f64> {
        DiscreteVariable::new(vec![self.hi, self.lo], vec![1.0 - self.r, self.r]).expect("valid two-point law")
    }

    /// The step carrying this law with bracket `[lo, hi]` and `s = 1`.
    pub fn branch(&self) -> Branch {
        Branch {
            law: self.law(),
            conditions: Conditions::Bracket {
                lower: self.lo,
                upper: self.hi,
                scale: 1.0,
            },
        }
    }

    /// One-step martingale started at 0.
    pub fn model(&self) -> MartingaleModel {
        MartingaleModel::iid(ModelKind::Martingale, 0.0, self.branch(), 1)
    }
}

/// Whether conditional means must vanish or only be nonpositive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Martingale,
    Supermartingale,
}

/// Declared conditions on one increment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Conditions {
    /// `C ≤ X ≤ D` and `D − C ≤ 2s`.
    Bracket { lower: f64, upper: f64, scale: f64 },
    /// `X ≤ D`, `Var X ≤ var` and `(D + var/D)/2 ≤ ŝ`.
    OneSided { upper: f64, variance: f64, scale: f64 },
}

impl Conditions {
    pub fn scale(&self) -> f64 {
        match *self {
            Conditions::Bracket { scale, .. } | Conditions::OneSided { scale, .. } => scale,
        }
    }

    fn shifted(&self, by: f64) -> Conditions {
        match *self {
            Conditions::Bracket { lower, upper, scale } => Conditions::Bracket {
                lower: lower + by,
                upper: upper + by,
                scale,
            },
            Conditions::OneSided { upper, variance, scale } => {
                let upper = upper + by;
                Conditions::OneSided {
                    upper,
                    variance,
                    scale: scale.max(0.5 * (upper + variance / upper)),
                }
            }
        }
    }
}

/// A conditional law together with its declared conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub law: DiscreteVariable<f64>,
    pub conditions: Conditions,
}

/// Which histories an override applies to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Selector {
    /// The support indices drawn so far start with this sequence.
    Prefix(Vec<usize>),
    /// `S_{i−1} < threshold`.
    SumBelow(f64),
    /// `S_{i−1} ≥ threshold`.
    SumAtLeast(f64),
}

impl Selector {
    fn matches(&self, history: &[usize], partial_sum: f64) -> bool {
        match self {
            Selector::Prefix(p) => history.starts_with(p),
            Selector::SumBelow(v) => partial_sum < *v,
            Selector::SumAtLeast(v) => partial_sum >= *v,
        }
    }
}

/// One step: a default branch plus overrides, the first match winning.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub default: Branch,
    pub overrides: Vec<(Selector, Branch)>,
}

impl Step {
    pub fn iid(branch: Branch) -> Self {
        Step {
            default: branch,
            overrides: Vec::new(),
        }
    }

    pub fn select(&self, history: &[usize], partial_sum: f64) -> &Branch {
        self.overrides
            .iter()
            .find(|(sel, _)| sel.matches(history, partial_sum))
            .map_or(&self.default, |(_, b)| b)
    }

    fn branches(&self) -> impl Iterator<Item = (String, &Branch)> {
        std::iter::once(("default".to_string(), &self.default))
            .chain(self.overrides.iter().enumerate().map(|(j, (_, b))| (format!("branches[{j}]"), b)))
    }

    /// Largest declared scale over the branches of this step.
    pub fn scale(&self) -> f64 {
        self.branches().map(|(_, b)| b.conditions.scale()).fold(0.0, f64::max)
    }
}

/// A discrete (super)martingale `S_k = S₀ + X₁ + … + X_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleModel {
    pub kind: ModelKind,
    pub initial: f64,
    pub steps: Vec<Step>,
}

impl MartingaleModel {
    pub fn iid(kind: ModelKind, initial: f64, branch: Branch, n: usize) -> Self {
        MartingaleModel {
            kind,
            initial,
            steps: vec![Step::iid(branch); n],
        }
    }

    /// Per-step scales (largest declared scale over each step's branches).
    pub fn step_scales(&self) -> Vec<f64> {
        self.steps.iter().map(Step::scale).collect()
    }

    /// Aggregate scale `‖(s_i)‖₂`.
    pub fn scale(&self) -> f64 {
        euclidean_norm(&self.step_scales())
    }

    /// Checks every branch against its declared conditions and the model
    /// kind. Errors name the offending branch as `steps[i].default` or
    /// `steps[i].branches[j]`.
    pub fn validate(&self) -> Result<()> {
        let fail = |path: String, message: String| Err(Error::Validation { path, message });
        if !(self.initial.is_finite() && self.initial <= 0.0) {
            return fail("initial".into(), format!("S0 must be finite and <= 0, got {}", self.initial));
        }
        if self.steps.is_empty() {
            return fail("steps".into(), "at least one step is required".into());
        }
        for (i, step) in self.steps.iter().enumerate() {
            for (j, (sel, _)) in step.overrides.iter().enumerate() {
                if let Selector::SumBelow(v) | Selector::SumAtLeast(v) = sel {
                    if !v.is_finite() {
                        return fail(format!("steps[{i}].branches[{j}]"), "selector threshold must be finite".into());
                    }
                }
            }
            for (name, branch) in step.branches() {
                if let Err(message) = check_branch(self.kind, branch) {
                    return fail(format!("steps[{i}].{name}"), message);
                }
            }
        }
        Ok(())
    }

    /// Replaces each branch by its conditionally centered version: the law
    /// is shifted by minus its mean and the declared conditions with it. The
    /// result is a martingale started at 0.
    pub fn centered(&self) -> MartingaleModel {
        let center = |b: &Branch| {
            let mu = b.law.mean();
            let support = b.law.support().iter().map(|x| x - mu).collect();
            Branch {
                law: DiscreteVariable::new(support, b.law.probs().to_vec()).expect("shift keeps the law valid"),
                conditions: b.conditions.shifted(-mu),
            }
        };
        MartingaleModel {
            kind: ModelKind::Martingale,
            initial: 0.0,
            steps: self
                .steps
                .iter()
                .map(|s| Step {
                    default: center(&s.default),
                    overrides: s.overrides.iter().map(|(sel, b)| (sel.clone(), center(b))).collect(),
                })
                .collect(),
        }
    }
}

fn check_branch(kind: ModelKind, b: &Branch) -> std::result::Result<(), String> {
    let xs = b.law.support();
    if let Some(x) = xs.iter().find(|x| !x.is_finite()) {
        return Err(format!("support point {x} is not finite"));
    }
    let magnitude = xs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = CONDITION_TOL * magnitude;
    let mu = b.law.mean();
    match kind {
        ModelKind::Martingale if mu.abs() > MEAN_TOL * magnitude => {
            return Err(format!("conditional mean {mu} is not zero"));
        }
        ModelKind::Supermartingale if mu > MEAN_TOL * magnitude => {
            return Err(format!("conditional mean {mu} is positive"));
        }
        _ => {}
    }
    match b.conditions {
        Conditions::Bracket { lower, upper, scale } => {
            if ![lower, upper, scale].iter().all(|v| v.is_finite()) || scale < 0.0 {
                return Err("C, D and s must be finite with s >= 0".into());
            }
            if let Some(x) = xs.iter().find(|&&x| x < lower - tol || x > upper + tol) {
                return Err(format!("support point {x} lies outside [C, D] = [{lower}, {upper}]"));
            }
            if upper - lower > 2.0 * scale + tol {
                return Err(format!("D - C = {} exceeds 2s = {}", upper - lower, 2.0 * scale));
            }
        }
        Conditions::OneSided { upper, variance, scale } => {
            if ![upper, variance, scale].iter().all(|v| v.is_finite()) || upper <= 0.0 || variance < 0.0 {
                return Err("D must be positive and var nonnegative".into());
            }
            if let Some(x) = xs.iter().find(|&&x| x > upper + tol) {
                return Err(format!("support point {x} exceeds D = {upper}"));
            }
            let var = b.law.variance();
            if var > variance + tol * magnitude {
                return Err(format!("conditional variance {var} exceeds declared {variance}"));
            }
            let need = 0.5 * (upper + variance / upper);
            if need > scale + tol {
                return Err(format!("(D + var/D)/2 = {need} exceeds s_hat = {scale}"));
            }
        }
    }
    Ok(())
}

/// Symmetric sign increments `X_i = a_i ε_i` with `C = −|a_i|`, `D = |a_i|`,
/// `s_i = |a_i|`.
pub fn rademacher_model(weights: &[f64]) -> Result<MartingaleModel> {
    if weights.is_empty() {
        return domain("weights must be non-empty");
    }
    let mut steps = Vec::with_capacity(weights.len());
    for &w in weights {
        ensure_finite("weight", w)?;
        let a = w.abs();
        let law = if a == 0.0 {
            DiscreteVariable::new(vec![0.0], vec![1.0])?
        } else {
            DiscreteVariable::new(vec![-a, a], vec![0.5, 0.5])?
        };
        steps.push(Step::iid(Branch {
            law,
            conditions: Conditions::Bracket {
                lower: -a,
                upper: a,
                scale: a,
            },
        }));
    }
    Ok(MartingaleModel {
        kind: ModelKind::Martingale,
        initial: 0.0,
        steps,
    })
}

/// `n` equal weights `1/√n`.
pub fn equal_weights(n: usize) -> Vec<f64> {
    vec![1.0 / (n as f64).sqrt(); n]
}

/// Weights `a_i ∝ i` with unit Euclidean norm.
pub fn linear_weights(n: usize) -> Vec<f64> {
    let norm = ((1..=n).map(|i| (i * i) as f64).sum::<f64>()).sqrt();
    (1..=n).map(|i| i as f64 / norm).collect()
}

/// `n` steps whose law depends on the sign of the running sum: the
/// asymmetric two-point law with `r = 0.3` while `S_{i−1} < 0`, symmetric
/// `±1/2` signs otherwise.
pub fn sign_adapted_model(n: usize) -> Result<MartingaleModel> {
    if n == 0 {
        return domain("n must be at least 1");
    }
    let below = two_point_increment(0.3)?.branch();
    let above = Branch {
        law: DiscreteVariable::new(vec![-0.5, 0.5], vec![0.5, 0.5])?,
        conditions: Conditions::Bracket {
            lower: -0.5,
            upper: 0.5,
            scale: 0.5,
        },
    };
    let step = Step {
        default: above,
        overrides: vec![(Selector::SumBelow(0.0), below)],
    };
    Ok(MartingaleModel {
        kind: ModelKind::Martingale,
        initial: 0.0,
        steps: vec![step; n],
    })
}

/// Two-point increments with range 2 shifted down by `drift ≥ 0`, a
/// supermartingale.
pub fn drifted_two_point_model(r: f64, drift: f64, n: usize) -> Result<MartingaleModel> {
    if !(drift.is_finite() && drift >= 0.0) {
        return domain(format!("drift must be finite and nonnegative, got {drift}"));
    }
    if n == 0 {
        return domain("n must be at least 1");
    }
    let tp = two_point_increment(r)?;
    let branch = Branch {
        law: DiscreteVariable::new(vec![tp.hi - drift, tp.lo - drift], vec![1.0 - r, r])?,
        conditions: Conditions::Bracket {
            lower: tp.lo - drift,
            upper: tp.hi - drift,
            scale: 1.0,
        },
    };
    Ok(MartingaleModel::iid(ModelKind::Supermartingale, 0.0, branch, n))
}

/// Rare large jumps: `1` with probability `p`, `−p/(1−p)` otherwise,
/// declared through `D = 1` and the exact variance `p/(1−p)`.
pub fn one_sided_model(p: f64, n: usize) -> Result<MartingaleModel> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("p must lie in (0, 1), got {p}"));
    }
    if n == 0 {
        return domain("n must be at least 1");
    }
    let law = DiscreteVariable::new(vec![1.0, -p / (1.0 - p)], vec![p, 1.0 - p])?;
    let variance = law.variance();
    let branch = Branch {
        law,
        conditions: Conditions::OneSided {
            upper: 1.0,
            variance,
            scale: 0.5 * (1.0 + variance),
        },
    };
    Ok(MartingaleModel::iid(ModelKind::Martingale, 0.0, branch, n))
}

/// A finite law on the reals, as sorted distinct values with probabilities
/// and precomputed upper tails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeLaw {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
    /// `tails[k] = P(V ≥ values[k])`.
    pub tails: Vec<f64>,
}

impl LatticeLaw {
    fn from_pairs(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, Neumaier)> = Vec::new();
        for (v, p) in pairs {
            match merged.last_mut() {
                Some((last, acc)) if *last == v => acc.add(p),
                _ => {
                    let mut acc = Neumaier::default();
                    acc.add(p);
                    merged.push((v, acc));
                }
            }
        }
        let values: Vec<f64> = merged.iter().map(|m| m.0).collect();
        let probs: Vec<f64> = merged.iter().map(|m| m.1.value()).collect();
        let mut tails = vec![0.0; probs.len()];
        let mut acc = Neumaier::default();
        for k in (0..probs.len()).rev() {
            acc.add(probs[k]);
            tails[k] = acc.value();
        }
        LatticeLaw { values, probs, tails }
    }

    /// `P(V ≥ x)`.
    pub fn tail(&self, x: f64) -> f64 {
        let k = self.values.partition_point(|&v| v < x);
        self.tails.get(k).copied().unwrap_or(0.0)
    }

    /// `E positive_power(V − t, α)`.
    pub fn moment(&self, t: f64, alpha: f64) -> f64 {
        crate::sum::sum(self.values.iter().zip(&self.probs).map(|(v, p)| p * positive_power(v - t, alpha)))
    }

    pub fn total_mass(&self) -> f64 {
        self.tails.first().copied().unwrap_or(0.0)
    }
}

/// Exact laws of `S_n` and `M_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnumerationResult {
    pub paths: usize,
    pub final_law: LatticeLaw,
    pub max_law: LatticeLaw,
}

impl EnumerationResult {
    /// `P(S_n ≥ x)`.
    pub fn tail(&self, x: f64) -> f64 {
        self.final_law.tail(x)
    }

    /// `P(M_n ≥ x)`.
    pub fn max_tail(&self, x: f64) -> f64 {
        self.max_law.tail(x)
    }

    /// `E(S_n − t)₊^α` (`α = 0` gives `P(S_n ≥ t)`).
    pub fn moment(&self, t: f64, alpha: f64) -> f64 {
        self.final_law.moment(t, alpha)
    }

    /// `E(M_n − x)₊^β`.
    pub fn max_moment(&self, x: f64, beta: f64) -> f64 {
        self.max_law.moment(x, beta)
    }
}

#[derive(Clone, Copy)]
struct Leaf {
    s: f64,
    m: f64,
    p: f64,
}

struct Walker<'a> {
    model: &'a MartingaleModel,
    count: &'a AtomicUsize,
    over: &'a AtomicBool,
}

impl Walker<'_> {
    fn walk(&self, i: usize, history: &mut Vec<usize>, s: f64, m: f64, p: f64, out: &mut Vec<Leaf>) {
        if self.over.load(Ordering::Relaxed) {
            return;
        }
        if i == self.model.steps.len() {
            if self.count.fetch_add(1, Ordering::Relaxed) >= PATH_BUDGET {
                self.over.store(true, Ordering::Relaxed);
            }
            out.push(Leaf { s, m, p });
            return;
        }
        let branch = self.model.steps[i].select(history, s);
        for (j, (&x, &q)) in branch.law.support().iter().zip(branch.law.probs()).enumerate() {
            if q == 0.0 {
                continue;
            }
            let next = s + x;
            history.push(j);
            self.walk(i + 1, history, next, m.max(next), p * q, out);
            history.pop();
        }
    }
}

/// Exact enumeration of every positive-probability path.
///
/// The model is validated first. The first step's outcomes are expanded in
/// parallel and concatenated in order, so the result does not depend on
/// scheduling.
pub fn enumerate_exact(model: &MartingaleModel) -> Result<EnumerationResult> {
    model.validate()?;
    let count = AtomicUsize::new(0);
    let over = AtomicBool::new(false);
    let walker = Walker {
        model,
        count: &count,
        over: &over,
    };
    let s0 = model.initial;
    let first = model.steps[0].select(&[], s0);
    let roots: Vec<(usize, f64, f64)> = first
        .law
        .support()
        .iter()
        .zip(first.law.probs())
        .enumerate()
        .filter(|(_, (_, &q))| q > 0.0)
        .map(|(j, (&x, &q))| (j, x, q))
        .collect();
    let chunks: Vec<Vec<Leaf>> = roots
        .par_iter()
        .map(|&(j, x, q)| {
            let mut out = Vec::new();
            let mut history = vec![j];
            walker.walk(1, &mut history, s0 + x, s0.max(s0 + x), q, &mut out);
            out
        })
        .collect();
    if over.load(Ordering::Relaxed) {
        return Err(Error::Range(format!("more than {PATH_BUDGET} paths")));
    }
    let leaves: Vec<Leaf> = chunks.into_iter().flatten().collect();
    Ok(EnumerationResult {
        paths: leaves.len(),
        final_law: LatticeLaw::from_pairs(leaves.iter().map(|l| (l.s, l.p)).collect()),
        max_law: LatticeLaw::from_pairs(leaves.iter().map(|l| (l.m, l.p)).collect()),
    })
}

/// Exact laws for models whose probabilities are all dyadic: probabilities
/// are integers over `2^log2_denominator`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicEnumeration {
    pub log2_denominator: u32,
    /// Sorted distinct `S_n` values with numerators.
    pub final_law: Vec<(f64, u128)>,
    pub max_law: Vec<(f64, u128)>,
}

impl DyadicEnumeration {
    fn tail_numerator(law: &[(f64, u128)], x: f64) -> u128 {
        law.iter().filter(|(v, _)| *v >= x).map(|(_, c)| c).sum()
    }

    /// `P(S_n ≥ x)` as `(numerator, log2 denominator)`.
    pub fn tail(&self, x: f64) -> (u128, u32) {
        (Self::tail_numerator(&self.final_law, x), self.log2_denominator)
    }

    /// `P(M_n ≥ x)` as `(numerator, log2 denominator)`.
    pub fn max_tail(&self, x: f64) -> (u128, u32) {
        (Self::tail_numerator(&self.max_law, x), self.log2_denominator)
    }
}

fn dyadic_exponent(p: f64) -> Option<u32> {
    (0..=32u32).find(|&k| {
        let scaled = p * 2f64.powi(k as i32);
        scaled.fract() == 0.0
    })
}

/// Largest total exponent handled by the exact mode.
pub const DYADIC_MAX_BITS: u32 = 120;

/// Exact enumeration with integer probability numerators.
pub fn enumerate_dyadic(model: &MartingaleModel) -> Result<DyadicEnumeration> {
    model.validate()?;
    let mut exps = Vec::with_capacity(model.steps.len());
    for (i, step) in model.steps.iter().enumerate() {
        let mut e = 0;
        for (name, b) in step.branches() {
            for &p in b.law.probs() {
                let k = dyadic_exponent(p).ok_or_else(|| Error::Domain(format!(
                    "steps[{i}].{name}: probability {p} is not dyadic"
                )))?;
                e = e.max(k);
            }
        }
        exps.push(e);
    }
    let total: u32 = exps.iter().sum();
    if total > DYADIC_MAX_BITS {
        return Err(Error::Range(format!("denominator 2^{total} exceeds 2^{DYADIC_MAX_BITS}")));
    }
    let mut leaves: Vec<(f64, f64, u128)> = Vec::new();
    let mut stack: Vec<(usize, Vec<usize>, f64, f64, u128)> = vec![(0, Vec::new(), model.initial, model.initial, 1)];
    while let Some((i, history, s, m, num)) = stack.pop() {
        if i == model.steps.len() {
            if leaves.len() >= PATH_BUDGET {
                return Err(Error::Range(format!("more than {PATH_BUDGET} paths")));
            }
            leaves.push((s, m, num));
            continue;
        }
        let branch = model.steps[i].select(&history, s);
        let scale = 2f64.powi(exps[i] as i32);
        for (j, (&x, &q)) in branch.law.support().iter().zip(branch.law.probs()).enumerate().rev() {
            if q == 0.0 {
                continue;
            }
            let mut h = history.clone();
            h.push(j);
            stack.push((i + 1, h, s + x, m.max(s + x), num * (q * scale) as u128));
        }
    }
    let merge = |mut v: Vec<(f64, u128)>| {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, u128)> = Vec::new();
        for (x, c) in v {
            match out.last_mut() {
                Some((last, acc)) if *last == x => *acc += c,
                _ => out.push((x, c)),
            }
        }
        out
    };
    Ok(DyadicEnumeration {
        log2_denominator: total,
        final_law: merge(leaves.iter().map(|l| (l.0, l.2)).collect()),
        max_law: merge(leaves.iter().map(|l| (l.1, l.2)).collect()),
    })
}

/// Empirical tails at one threshold with 99% normal-approximation
/// half-widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McTail {
    pub x: f64,
    pub final_tail: f64,
    pub final_half_width: f64,
    pub max_tail: f64,
    pub max_half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub n_paths: usize,
    pub seed: u64,
    pub mean_final: f64,
    pub tails: Vec<McTail>,
}

fn sample_index(u: f64, probs: &[f64]) -> usize {
    let mut cum = 0.0;
    let mut last = 0;
    for (j, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        cum += p;
        last = j;
        if u < cum {
            return j;
        }
    }
    last
}

/// Monte Carlo of `(S_n, M_n)`. Path `k` draws from ChaCha8 seeded with
/// `seed` on stream `k`, so the estimates do not depend on how many workers
/// the current rayon pool has.
pub fn simulate_mc(model: &MartingaleModel, n_paths: usize, seed: u64, x_grid: &[f64]) -> Result<McReport> {
    model.validate()?;
    if n_paths < MIN_MC_PATHS {
        return domain(format!("need at least {MIN_MC_PATHS} paths, got {n_paths}"));
    }
    for &x in x_grid {
        ensure_finite("x", x)?;
    }
    let base = ChaCha8Rng::seed_from_u64(seed);
    let n = model.steps.len();
    let samples: Vec<(f64, f64)> = (0..n_paths as u64)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |history, k| {
                let mut rng = base.clone();
                rng.set_stream(k);
                history.clear();
                let mut s = model.initial;
                let mut m = s;
                for step in &model.steps {
                    let b = step.select(history, s);
                    let j = sample_index(rng.random::<f64>(), b.law.probs());
                    history.push(j);
                    s += b.law.support()[j];
                    m = m.max(s);
                }
                (s, m)
            },
        )
        .collect();
    let finals_unsorted: Vec<f64> = samples.iter().map(|p| p.0).collect();
    let mean_final = crate::sum::pairwise(&finals_unsorted) / n_paths as f64;
    drop(finals_unsorted);
    let mut finals: Vec<f64> = samples.iter().map(|p| p.0).collect();
    let mut maxima: Vec<f64> = samples.iter().map(|p| p.1).collect();
    drop(samples);
    finals.sort_by(f64::total_cmp);
    maxima.sort_by(f64::total_cmp);
    let nf = n_paths as f64;
    let estimate = |sorted: &[f64], x: f64| {
        let count = sorted.len() - sorted.partition_point(|&v| v < x);
        let p = count as f64 / nf;
        (p, Z_99 * (p * (1.0 - p) / nf).sqrt())
    };
    let tails = x_grid
        .iter()
        .map(|&x| {
            let (final_tail, final_half_width) = estimate(&finals, x);
            let (max_tail, max_half_width) = estimate(&maxima, x);
            McTail {
                x,
                final_tail,
                final_half_width,
                max_tail,
                max_half_width,
            }
        })
        .collect();
    Ok(McReport {
        n_paths,
        seed,
        mean_final,
        tails,
    })
}

/// [`simulate_mc`] inside a dedicated pool of `threads` workers.
pub fn simulate_mc_with_threads(
    model: &MartingaleModel,
    n_paths: usize,
    seed: u64,
    x_grid: &[f64],
    threads: usize,
) -> Result<McReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Range(format!("cannot start worker pool: {e}")))?;
    pool.install(|| simulate_mc(model, n_paths, seed, x_grid))
}

/// One compared pair `lhs ≤ rhs` at a labelled location.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckPoint {
    pub check: String,
    pub location: BTreeMap<String, f64>,
    pub lhs: f64,
    pub rhs: f64,
}

impl CheckPoint {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Outcome of a verification suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub suite: String,
    pub checks: usize,
    pub failed: usize,
    pub passed: bool,
    /// Minimal `rhs − lhs` over all checks.
    pub min_slack: f64,
    pub min_slack_at: Option<CheckPoint>,
    /// The first failures, at most 100.
    pub failures: Vec<CheckPoint>,
}

impl VerificationReport {
    pub fn new(suite: &str) -> Self {
        VerificationReport {
            suite: suite.to_string(),
            checks: 0,
            failed: 0,
            passed: true,
            min_slack: f64::INFINITY,
            min_slack_at: None,
            failures: Vec::new(),
        }
    }

    /// Records `lhs ≤ rhs + tol`.
    pub fn record(&mut self, check: &str, location: &[(&str, f64)], lhs: f64, rhs: f64, tol: f64) {
        self.checks += 1;
        let ok = lhs <= rhs + tol;
        let slack = rhs - lhs;
        let better = slack < self.min_slack || slack.is_nan();
        if !ok || better {
            let point = CheckPoint {
                check: check.to_string(),
                location: location.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
                lhs,
                rhs,
            };
            if better {
                self.min_slack = slack;
                self.min_slack_at = Some(point.clone());
            }
            if !ok {
                self.failed += 1;
                self.passed = false;
                if self.failures.len() < MAX_RECORDED_FAILURES {
                    self.failures.push(point);
                }
            }
        }
    }

    /// Folds another report into this one.
    pub fn merge(&mut self, other: VerificationReport) {
        self.checks += other.checks;
        self.failed += other.failed;
        self.passed &= other.passed;
        if other.min_slack < self.min_slack {
            self.min_slack = other.min_slack;
            self.min_slack_at = other.min_slack_at;
        }
        let room = MAX_RECORDED_FAILURES.saturating_sub(self.failures.len());
        self.failures.extend(other.failures.into_iter().take(room));
    }
}

fn scaled_tol(rhs: f64) -> f64 {
    DOMINATION_TOL * rhs.max(1.0)
}

fn positive_scale(model: &MartingaleModel) -> Result<f64> {
    let s = model.scale();
    if s > 0.0 {
        Ok(s)
    } else {
        domain("model has zero aggregate scale")
    }
}

/// `E(S_n − t)₊⁵ ≤ E(sZ − t)₊⁵` for every `t` in the grid.
pub fn verify_moment_domination(model: &MartingaleModel, t_grid: &[f64]) -> Result<VerificationReport> {
    let e = enumerate_exact(model)?;
    moment_domination_from(&e, positive_scale(model)?, t_grid)
}

/// [`verify_moment_domination`] on an existing enumeration.
pub fn moment_domination_from(e: &EnumerationResult, s: f64, t_grid: &[f64]) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("moments");
    for &t in t_grid {
        ensure_finite("t", t)?;
        let lhs = e.moment(t, 5.0);
        let rhs = scaled_moment(s, t, MomentOrder::FIVE)?;
        report.record("E(S_n-t)_+^5 <= E(sZ-t)_+^5", &[("t", t), ("s", s)], lhs, rhs, scaled_tol(rhs));
    }
    Ok(report)
}

/// `P(S_n ≥ x)` (and `P(M_n ≥ x)` for martingales) against the combined
/// bound on the grid.
pub fn verify_tail_domination(model: &MartingaleModel, x_grid: &[f64]) -> Result<VerificationReport> {
    let e = enumerate_exact(model)?;
    tail_domination_from(&e, model.kind, positive_scale(model)?, x_grid)
}

/// [`verify_tail_domination`] on an existing enumeration.
pub fn tail_domination_from(
    e: &EnumerationResult,
    kind: ModelKind,
    s: f64,
    x_grid: &[f64],
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("tails");
    for &x in x_grid {
        let q = BoundQuery::new(x, s)?;
        let rhs = combined_bound(q);
        report.record("P(S_n>=x) <= combined", &[("x", x), ("s", s)], e.tail(x), rhs, scaled_tol(rhs));
        if kind == ModelKind::Martingale {
            let rhs = maximal_tail_bound(q);
            report.record("P(M_n>=x) <= combined", &[("x", x), ("s", s)], e.max_tail(x), rhs, scaled_tol(rhs));
        }
    }
    Ok(report)
}

/// Every attained value of `S_n` and `M_n`, plus one point below both.
pub fn lattice_grid(e: &EnumerationResult) -> Vec<f64> {
    let mut xs: Vec<f64> = e.final_law.values.iter().chain(&e.max_law.values).copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if let Some(&lo) = xs.first() {
        xs.insert(0, lo - 1.0);
    }
    xs
}

/// `t` from `−6s` to `6s` in steps of `s/4`.
pub fn standard_t_grid(s: f64) -> Vec<f64> {
    (-24..=24).map(|k| k as f64 * 0.25 * s).collect()
}

/// `L(r, t) = r(2r − 2 − t)₊⁵ + (1 − r)(2r − t)₊⁵`, the fifth-moment
/// generator at `t` of the two-point increment with parameter `r`.
pub fn lemma_l(r: f64, t: f64) -> f64 {
    r * positive_power(2.0 * r - 2.0 - t, 5.0) + (1.0 - r) * positive_power(2.0 * r - t, 5.0)
}

/// `L(r, t) ≤ R(t) = E(Z − t)₊⁵` on the product grid.
pub fn verify_lemma_lr(r_grid: &[f64], t_grid: &[f64]) -> Result<VerificationReport> {
    if r_grid.is_empty() || t_grid.is_empty() {
        return domain("grids must be non-empty");
    }
    if let Some(r) = r_grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return domain(format!("r = {r} outside [0, 1]"));
    }
    let mut report = VerificationReport::new("lemma");
    for &t in t_grid {
        let big_r = closed_form_r(t)?;
        let tol = LEMMA_TOL * big_r.abs().max(1.0);
        for &r in r_grid {
            report.record("L(r,t) <= R(t)", &[("r", r), ("t", t)], lemma_l(r, t), big_r, tol);
        }
    }
    Ok(report)
}

/// `{0, 1/steps, …, 1}`.
pub fn unit_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| k as f64 / steps as f64).collect()
}

/// `lo, lo + step, …` up to `hi` (rounded to the nearest node count).
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if ![lo, hi, step].iter().all(|v| v.is_finite()) || step <= 0.0 || hi < lo {
        return domain(format!("invalid grid lo = {lo}, hi = {hi}, step = {step}"));
    }
    let n = ((hi - lo) / step).round() as usize;
    Ok((0..=n).map(|k| lo + k as f64 * step).collect())
}

/// Maximal moment inequalities on an enumerable martingale:
/// the `k₁` bound on `E(M_n − x)₊^β`, its `β = 0` Doob form, the snapshot
/// `k` bound on `E(S_n − x)₊^β`, and Doob's `L^α` inequality when `α > 1`.
pub fn verify_maximal_moment(model: &MartingaleModel, ab: AlphaBeta, x: f64, t: f64) -> Result<VerificationReport> {
    if model.kind != ModelKind::Martingale {
        return domain("maximal moment checks need a martingale model");
    }
    let e = enumerate_exact(model)?;
    let (alpha, beta) = (ab.alpha(), ab.beta());
    let loc = [("alpha", alpha), ("beta", beta), ("x", x), ("t", t)];
    let snapshot = e.moment(t, alpha);
    let mut report = VerificationReport::new("maximal");

    let rhs = maximal_moment_bound(ab, x, t, snapshot)?;
    report.record("E(M_n-x)_+^beta <= k1 bound", &loc, e.max_moment(x, beta), rhs, scaled_tol(rhs));

    let rhs = snapshot / (x - t).powf(alpha);
    report.record("P(M_n>=x) <= E(S_n-t)_+^alpha/(x-t)^alpha", &loc, e.max_tail(x), rhs, scaled_tol(rhs));

    let rhs = snapshot_moment_bound(ab, x, t, snapshot)?;
    report.record("E(S_n-x)_+^beta <= k bound", &loc, e.moment(x, beta), rhs, scaled_tol(rhs));

    if alpha > 1.0 {
        let rhs = doob_factor(alpha) * e.moment(0.0, alpha);
        report.record("E(M_n)_+^alpha <= doob * E(S_n)_+^alpha", &loc, e.max_moment(0.0, alpha), rhs, scaled_tol(rhs));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_point_laws() {
        let half = two_point_increment(0.5).unwrap();
        assert_eq!((half.hi, half.lo), (1.0, -1.0));
        assert_eq!(half.law().probs(), &[0.5, 0.5]);
        let zero = two_point_increment(0.0).unwrap();
        assert_eq!(zero.law().probs(), &[1.0, 0.0]);
        assert_eq!(zero.lo, -2.0);
        let tp = two_point_increment(0.3).unwrap();
        assert!(tp.law().mean().abs() < 1e-16);
        assert_eq!(tp.hi - tp.lo, 2.0);
        assert!(two_point_increment(1.1).is_err());
        assert!(two_point_increment(-0.1).is_err());
        for r in unit_grid(10) {
            tp_valid(r);
        }
    }

    fn tp_valid(r: f64) {
        two_point_increment(r).unwrap().model().validate().unwrap();
    }

    #[test]
    fn rademacher_two_steps() {
        let e = enumerate_exact(&rademacher_model(&[1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(e.paths, 4);
        assert_eq!(e.tail(2.0), 0.25);
        assert_eq!(e.max_tail(1.0), 0.5);
        assert_eq!(e.tail(-100.0), 1.0);
        assert_eq!(e.max_tail(0.0), 1.0); // M_n includes S₀ = 0
        let d = enumerate_dyadic(&rademacher_model(&[1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(d.tail(2.0), (1, 2));
        assert_eq!(d.max_tail(1.0), (2, 2));
    }

    #[test]
    fn rademacher_one_step_against_bound() {
        let m = rademacher_model(&[1.0]).unwrap();
        let e = enumerate_exact(&m).unwrap();
        assert_eq!(e.tail(1.0), 0.5);
        let b = combined_bound(BoundQuery::new(1.0, 1.0).unwrap());
        assert_relative_eq!(b, (-0.5f64).exp(), max_relative = 1e-15);
        assert_eq!(m.scale(), 1.0);
        assert!(rademacher_model(&[]).is_err());
    }

    #[test]
    fn normalized_weights_have_unit_scale() {
        for n in 1..=12 {
            assert_relative_eq!(rademacher_model(&equal_weights(n)).unwrap().scale(), 1.0, max_relative = 1e-15);
            assert_relative_eq!(rademacher_model(&linear_weights(n)).unwrap().scale(), 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn moment_below_lattice_is_full_power() {
        let e = enumerate_exact(&rademacher_model(&equal_weights(3)).unwrap()).unwrap();
        let t = -10.0;
        let expanded = crate::sum::sum(
            e.final_law.values.iter().zip(&e.final_law.probs).map(|(v, p)| p * (v - t).powi(5)),
        );
        assert_relative_eq!(e.moment(t, 5.0), expanded, max_relative = 1e-15);
    }

    #[test]
    fn validation_rejects_wide_bracket() {
        let mut m = rademacher_model(&[1.0, 1.0]).unwrap();
        m.steps[1].default.conditions = Conditions::Bracket {
            lower: -1.0,
            upper: 1.0,
            scale: 0.9,
        };
        match verify_moment_domination(&m, &[0.0]) {
            Err(Error::Validation { path, .. }) => assert_eq!(path, "steps[1].default"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn validation_rejects_drift_in_martingale() {
        let mut m = drifted_two_point_model(0.5, 0.1, 2).unwrap();
        assert!(m.validate().is_ok());
        m.kind = ModelKind::Martingale;
        assert!(matches!(m.validate(), Err(Error::Validation { .. })));
        let mut m = rademacher_model(&[1.0]).unwrap();
        m.initial = 0.5;
        assert!(matches!(m.validate(), Err(Error::Validation { .. })));
    }

    #[test]
    fn one_sided_conditions() {
        let m = one_sided_model(0.1, 3).unwrap();
        m.validate().unwrap();
        let mut bad = m.clone();
        bad.steps[2].default.conditions = Conditions::OneSided {
            upper: 1.0,
            variance: 0.05,
            scale: 1.0,
        };
        assert!(matches!(bad.validate(), Err(Error::Validation { path, .. }) if path == "steps[2].default"));
    }

    #[test]
    fn two_point_moment_domination() {
        let m = two_point_increment(0.3).unwrap().model();
        let rep = verify_moment_domination(&m, &uniform_grid(-6.0, 6.0, 0.25).unwrap()).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.checks, 49);
    }

    #[test]
    fn rademacher_ten_moments_and_twelve_tails() {
        let m = rademacher_model(&equal_weights(10)).unwrap();
        assert!(verify_moment_domination(&m, &standard_t_grid(1.0)).unwrap().passed);
        let m = rademacher_model(&equal_weights(12)).unwrap();
        let e = enumerate_exact(&m).unwrap();
        let rep = tail_domination_from(&e, m.kind, 1.0, &lattice_grid(&e)).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn drifted_supermartingale_tails() {
        let m = drifted_two_point_model(0.4, 0.2, 8).unwrap();
        let e = enumerate_exact(&m).unwrap();
        assert!(tail_domination_from(&e, m.kind, m.scale(), &lattice_grid(&e)).unwrap().passed);
        // Centering can only raise tails.
        let c = enumerate_exact(&m.centered()).unwrap();
        for x in lattice_grid(&c) {
            assert!(c.tail(x) >= e.tail(x));
        }
    }

    #[test]
    fn sign_adapted_model_selects_by_sign() {
        let m = sign_adapted_model(3).unwrap();
        let step = &m.steps[1];
        assert_eq!(step.select(&[0], -0.5).conditions.scale(), 1.0);
        assert_eq!(step.select(&[1], 0.5).conditions.scale(), 0.5);
        assert_eq!(m.scale(), 3f64.sqrt());
        let rep = verify_moment_domination(&m, &standard_t_grid(m.scale())).unwrap();
        assert!(rep.passed);
    }

    #[test]
    fn prefix_selector() {
        let mut step = Step::iid(rademacher_model(&[1.0]).unwrap().steps[0].default.clone());
        let small = rademacher_model(&[0.5]).unwrap().steps[0].default.clone();
        step.overrides.push((Selector::Prefix(vec![1, 0]), small));
        assert_eq!(step.select(&[1, 0, 1], 0.0).conditions.scale(), 0.5);
        assert_eq!(step.select(&[1, 1], 0.0).conditions.scale(), 1.0);
    }

    #[test]
    fn lemma_values() {
        assert_eq!(lemma_l(0.5, -3.0), 528.0);
        assert_eq!(lemma_l(1.0, 0.0), 0.0);
        assert_eq!(lemma_l(0.3, 0.6), 0.0);
        let rep = verify_lemma_lr(&[0.5, 1.0], &[-3.0, 0.0]).unwrap();
        assert!(rep.passed);
        // R(0) − L(1/2, 0) = R(0) − 1/2 is smaller than R(−3) − 528 ≈ 30.
        let worst = rep.min_slack_at.unwrap();
        assert_eq!(worst.location["t"], 0.0);
        assert_relative_eq!(rep.min_slack, 3.191_538_243_211_461_4 - 0.5, max_relative = 1e-12);
        let rep = verify_lemma_lr(&[0.5], &[-3.0]).unwrap();
        assert_relative_eq!(rep.min_slack, 30.000_171_128_379_9, max_relative = 1e-9);
        assert!(verify_lemma_lr(&[], &[0.0]).is_err());
    }

    #[test]
    fn maximal_moment_rademacher_eight() {
        let m = rademacher_model(&equal_weights(8)).unwrap();
        let rep = verify_maximal_moment(&m, AlphaBeta::new(2.0, 1.0).unwrap(), 1.0, 0.0).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.checks, 4);
        let rep = verify_maximal_moment(&m, AlphaBeta::new(2.0, 2.0).unwrap(), 1.0, 0.0).unwrap();
        assert!(rep.passed);
        let e = enumerate_exact(&m).unwrap();
        assert!(e.max_moment(0.0, 2.0) <= 4.0 * e.moment(0.0, 2.0));
        let sup = drifted_two_point_model(0.5, 0.1, 2).unwrap();
        assert!(verify_maximal_moment(&sup, AlphaBeta::new(2.0, 1.0).unwrap(), 1.0, 0.0).is_err());
    }

    #[test]
    fn path_budget() {
        let m = rademacher_model(&equal_weights(21)).unwrap();
        assert!(matches!(enumerate_exact(&m), Err(Error::Range(_))));
    }

    #[test]
    fn mc_contract() {
        let m = rademacher_model(&equal_weights(5)).unwrap();
        assert!(simulate_mc(&m, 100, 1, &[0.0]).is_err());
        let a = simulate_mc_with_threads(&m, 20_000, 7, &[0.0, 1.0], 1).unwrap();
        let b = simulate_mc_with_threads(&m, 20_000, 7, &[0.0, 1.0], 3).unwrap();
        assert_eq!(a, b);
        let zero = rademacher_model(&[0.0, 0.0]).unwrap();
        let z = simulate_mc(&zero, 10_000, 1, &[0.0, 1e-9]).unwrap();
        assert_eq!(z.tails[0].final_tail, 1.0);
        assert_eq!(z.tails[1].final_tail, 0.0);
        assert_eq!(z.mean_final, 0.0);
    }

    #[test]
    fn report_merging() {
        let mut a = VerificationReport::new("x");
        a.record("c", &[("t", 0.0)], 1.0, 2.0, 0.0);
        let mut b = VerificationReport::new("y");
        b.record("c", &[("t", 1.0)], 3.0, 2.0, 0.0);
        a.merge(b);
        assert_eq!((a.checks, a.failed, a.passed), (2, 1, false));
        assert_eq!(a.min_slack, -1.0);
    }
}
