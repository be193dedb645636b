//! One-dimensional bracketing, root finding and convex minimization.

/// Golden-ratio conjugate `(√5 − 1)/2`.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

const MAX_EXPANSIONS: usize = 2000;

/// Finds `a < b` with `r(a) > 0 > r(b)` for a nonincreasing `r` on the open
/// interval `(lo, hi)`. Expansion doubles the step toward an infinite end and
/// halves the remaining distance toward a finite one.
///
/// Returns `None` when no sign change is found.
pub fn bracket_decreasing<F>(r: F, start: f64, lo: f64, hi: f64, step0: f64) -> Option<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let mut x = start;
    if !(x > lo && x < hi) {
        x = interior_point(lo, hi, step0);
    }
    let rx = r(x);
    if rx == 0.0 {
        return Some((x, x));
    }
    let mut step = step0.max(f64::MIN_POSITIVE);
    if rx > 0.0 {
        // root lies to the right
        let mut a = x;
        for _ in 0..MAX_EXPANSIONS {
            let next = if hi.is_finite() { a + 0.5 * (hi - a) } else { a + step };
            step *= 2.0;
            if next <= a || next >= hi {
                return None;
            }
            let v = r(next);
            if v <= 0.0 {
                return Some((a, next));
            }
            a = next;
        }
    } else {
        let mut b = x;
        for _ in 0..MAX_EXPANSIONS {
            let next = if lo.is_finite() { b - 0.5 * (b - lo) } else { b - step };
            step *= 2.0;
            if next >= b || next <= lo {
                return None;
            }
            let v = r(next);
            if v >= 0.0 {
                return Some((next, b));
            }
            b = next;
        }
    }
    None
}

fn interior_point(lo: f64, hi: f64, step: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo + step.max(lo.abs() * 1e-3).max(1e-12),
        (false, true) => hi - step.max(hi.abs() * 1e-3).max(1e-12),
        (false, false) => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootResult {
    pub root: f64,
    pub residual: f64,
    pub iterates: Vec<(f64, f64)>,
    /// The bracket shrank to adjacent floats before reaching exact zero.
    pub collapsed: bool,
}

/// Bisection with secant polishing for a nonincreasing `r` with
/// `r(a) ≥ 0 ≥ r(b)`. Iterates until the residual is exactly zero or the
/// bracket cannot shrink further.
pub fn bisect_secant<F>(r: F, mut a: f64, mut b: f64) -> RootResult
where
    F: Fn(f64) -> f64,
{
    let mut ra = r(a);
    let mut rb = r(b);
    let mut iterates = vec![(a, ra), (b, rb)];
    if ra == 0.0 {
        return RootResult { root: a, residual: 0.0, iterates, collapsed: false };
    }
    if rb == 0.0 {
        return RootResult { root: b, residual: 0.0, iterates, collapsed: false };
    }
    let mut use_secant = false;
    for _ in 0..400 {
        let mid = 0.5 * (a + b);
        if !(mid > a && mid < b) {
            break;
        }
        let mut x = mid;
        if use_secant && ra.is_finite() && rb.is_finite() {
            let s = b - rb * (b - a) / (rb - ra);
            if s > a && s < b {
                x = s;
            }
        }
        let rx = r(x);
        iterates.push((x, rx));
        if rx == 0.0 {
            return RootResult { root: x, residual: 0.0, iterates, collapsed: false };
        }
        let width = b - a;
        if rx > 0.0 {
            a = x;
            ra = rx;
        } else {
            b = x;
            rb = rx;
        }
        // secant once the bracket behaves; fall back to bisection if it stalls
        use_secant = (b - a) < 0.5 * width || !use_secant;
    }
    let (root, residual) = if ra.abs() <= rb.abs() { (a, ra) } else { (b, rb) };
    RootResult { root, residual, iterates, collapsed: true }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinResult {
    pub argmin: f64,
    pub value: f64,
    pub iterates: Vec<(f64, f64)>,
    /// Number of steps decided by the derivative sign because the two
    /// interior values were indistinguishable.
    pub sign_steps: usize,
}

/// Golden-section search for the minimizer of a convex `g` on `[a, b]`.
///
/// When the interior values tie to within rounding, the step is decided by
/// the sign of `dg` at the midpoint of the interior pair. `magnitude` is the
/// size of the terms that `g` sums, which sets the rounding level when they
/// cancel. Runs until the bracket cannot shrink.
pub fn golden_section<G, D>(g: G, dg: D, mut a: f64, mut b: f64, magnitude: f64) -> MinResult
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    let mut iterates = vec![(c, gc), (d, gd)];
    let mut sign_steps = 0;
    for _ in 0..500 {
        if !(c > a && d > c && b > d) {
            break;
        }
        let scale = gc.abs().max(gd.abs()).max(magnitude).max(1.0);
        let tied = !(gc.is_finite() && gd.is_finite()) || (gc - gd).abs() <= 8.0 * f64::EPSILON * scale;
        let go_left = if tied {
            sign_steps += 1;
            dg(0.5 * (c + d)) > 0.0
        } else {
            gc < gd
        };
        if go_left {
            b = d;
            d = c;
            gd = gc;
            c = b - INV_PHI * (b - a);
            gc = g(c);
            iterates.push((c, gc));
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INV_PHI * (b - a);
            gd = g(d);
            iterates.push((d, gd));
        }
    }
    let (argmin, value) = if gc <= gd { (c, gc) } else { (d, gd) };
    MinResult { argmin, value, iterates, sign_steps }
}
