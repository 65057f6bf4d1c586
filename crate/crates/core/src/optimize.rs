//! One-dimensional search helpers: grid scan followed by golden-section
//! refinement of the bracketing neighbourhood.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Minimizes a unimodal `f` on `[lo, hi]` to absolute tolerance `tol` in the
/// argument. Returns `(argmin, min)`.
pub(crate) fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (hi - lo).abs() > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Result of a scan-and-refine minimization.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScanMin {
    pub arg: f64,
    pub value: f64,
    /// The best scan point was the first or last grid node.
    pub at_edge: bool,
}

/// Scans `f` on the uniform grid `lo, lo+step, …, hi`, then refines around
/// the best node with golden-section search.
pub(crate) fn scan_then_golden<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, step: f64, tol: f64) -> ScanMin {
    let n = ((hi - lo) / step).round() as usize;
    let mut best = (0usize, f64::INFINITY);
    for k in 0..=n {
        let v = f(lo + k as f64 * step);
        if v < best.1 {
            best = (k, v);
        }
    }
    let at_edge = best.0 == 0 || best.0 == n;
    let center = lo + best.0 as f64 * step;
    let a = (center - step).max(lo);
    let b = (center + step).min(hi);
    let (arg, value) = golden_min(&mut f, a, b, tol);
    if value <= best.1 {
        ScanMin { arg, value, at_edge }
    } else {
        ScanMin { arg: center, value: best.1, at_edge }
    }
}
