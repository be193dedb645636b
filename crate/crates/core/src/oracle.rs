//! Brute-force solvers on the probability simplex, independent of the
//! closed-form posterior.

use rayon::prelude::*;

use crate::divergence::DivergenceGenerator;
use crate::error::{FdrError, Result};
use crate::model_space::{LossTable, ModelSupport};
use crate::roots::golden_section;

pub const MAX_REGULARIZED_ATOMS: usize = 12;
pub const MAX_CONSTRAINED_ATOMS: usize = 5;

/// `½·Σ|pᵢ − qᵢ|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// `D_f(P‖Q) = Σ qᵢ·f(pᵢ/qᵢ)`.
pub fn divergence(gen: &DivergenceGenerator, q: &[f64], p: &[f64]) -> f64 {
    q.iter().zip(p).map(|(q, p)| q * gen.f(p / q)).sum()
}

/// `R(P) + λ·D_f(P‖Q)`.
pub fn regularized_objective(
    gen: &DivergenceGenerator,
    support: &ModelSupport,
    loss: &LossTable,
    lambda: f64,
    p: &[f64],
) -> f64 {
    let risk: f64 = p.iter().zip(&loss.values).map(|(p, l)| p * l).sum();
    risk + lambda * divergence(gen, support.weights(), p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorDescentOptions {
    pub iterations: usize,
    /// Initial step size.
    pub step: f64,
    /// Lower bound on every iterate coordinate.
    pub floor: f64,
    /// Relative spread of the gradient over interior atoms that counts as
    /// stationary.
    pub kkt_tol: f64,
}

impl Default for MirrorDescentOptions {
    fn default() -> Self {
        Self { iterations: 100_000, step: 1.0, floor: 1e-12, kkt_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub tv_to_closed_form: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MirrorDescentResult {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub kkt_spread: f64,
    /// Filled only when a reference distribution is supplied.
    pub trace: Vec<TraceRow>,
}

/// Spread `max gᵢ − min gᵢ` of the gradient over atoms above the floor,
/// relative to the gradient scale.
fn kkt_spread(grad: &[f64], p: &[f64], floor: f64) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut scale: f64 = 1.0;
    for (g, &pi) in grad.iter().zip(p) {
        if pi > 100.0 * floor {
            lo = lo.min(*g);
            hi = hi.max(*g);
            scale = scale.max(g.abs());
        }
    }
    if lo > hi {
        return 0.0;
    }
    (hi - lo) / scale
}

fn normalize_floor(logits: &[f64], floor: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|y| (y - max).exp()).collect();
    let s: f64 = p.iter().sum();
    for v in &mut p {
        *v = (*v / s).max(floor);
    }
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

/// Minimizes `R(P) + λ·D_f(P‖Q)` over the simplex by entropic mirror
/// descent with backtracking, starting from `Q`.
///
/// The step grows after accepted iterations up to a cap that decays like
/// `1/√k`, and halves whenever the objective would increase. With
/// `reference` given, every iterate is traced against it.
pub fn brute_force_regularized(
    gen: &DivergenceGenerator,
    support: &ModelSupport,
    loss: &LossTable,
    lambda: f64,
    options: &MirrorDescentOptions,
    reference: Option<&[f64]>,
) -> Result<MirrorDescentResult> {
    let m = support.len();
    if m > MAX_REGULARIZED_ATOMS {
        return Err(FdrError::InvalidInput(format!(
            "regularized oracle supports at most {MAX_REGULARIZED_ATOMS} atoms, got {m}"
        )));
    }
    if loss.len() != m {
        return Err(FdrError::LengthMismatch { expected: m, got: loss.len() });
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(FdrError::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    let q = support.weights();
    let objective = |p: &[f64]| regularized_objective(gen, support, loss, lambda, p);
    let gradient = |p: &[f64]| -> Vec<f64> {
        p.iter()
            .zip(q)
            .zip(&loss.values)
            .map(|((p, q), l)| l + lambda * gen.fdot(p / q))
            .collect()
    };

    let mut p = q.to_vec();
    let mut value = objective(&p);
    let mut step = options.step;
    let mut trace = Vec::new();
    let mut spread = f64::INFINITY;
    let mut iterations = 0;
    let mut history = Vec::new();
    for k in 0..options.iterations {
        iterations = k + 1;
        let g = gradient(&p);
        spread = kkt_spread(&g, &p, options.floor);
        if spread <= options.kkt_tol {
            break;
        }
        let cap = 1e6 * options.step / ((k + 1) as f64).sqrt();
        let mut accepted = false;
        while step > 1e-300 {
            let logits: Vec<f64> = p.iter().zip(&g).map(|(pi, gi)| pi.ln() - step * gi).collect();
            let cand = normalize_floor(&logits, options.floor);
            let v = objective(&cand);
            // linear model plus KL(cand‖p)/step bounds the objective
            let mut linear = 0.0;
            let mut bregman = 0.0;
            let mut size = value.abs();
            for ((c, pi), gi) in cand.iter().zip(&p).zip(&g) {
                linear += gi * (c - pi);
                bregman += c * (c / pi).ln();
                size += (gi * pi).abs();
            }
            let model = value + linear + bregman.max(0.0) / step;
            if v <= value && v <= model + 8.0 * f64::EPSILON * size {
                accepted = cand != p;
                p = cand;
                value = v;
                step = (2.0 * step).min(cap);
                break;
            }
            step *= 0.5;
        }
        if let Some(r) = reference {
            trace.push(TraceRow { iter: k, objective: value, tv_to_closed_form: total_variation(&p, r) });
        }
        if k % 100 == 0 {
            history.push((k, value));
        }
        if !accepted {
            // no representable decrease remains
            break;
        }
    }
    let g = gradient(&p);
    spread = spread.min(kkt_spread(&g, &p, options.floor));
    if spread > 1e-6 && !floor_bound(&g, &p, options.floor) {
        return Err(FdrError::NonConvergence {
            message: format!("mirror descent stalled with gradient spread {spread:e}"),
            trace: history,
        });
    }
    Ok(MirrorDescentResult { weights: p, objective: value, iterations, kkt_spread: spread, trace })
}

/// True when the remaining spread comes from atoms pinned at the floor whose
/// gradient exceeds the interior level, i.e. the optimum sits on the boundary.
fn floor_bound(grad: &[f64], p: &[f64], floor: f64) -> bool {
    let interior: Vec<f64> = grad.iter().zip(p).filter(|(_, &pi)| pi > 100.0 * floor).map(|(g, _)| *g).collect();
    if interior.is_empty() {
        return false;
    }
    let lo = interior.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = interior.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = hi.abs().max(lo.abs()).max(1.0);
    (hi - lo) <= 1e-6 * scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedResult {
    pub weights: Vec<f64>,
    pub risk: f64,
    pub divergence: f64,
    pub grid_points: usize,
}

/// Grid spacing used when none is given: `1/200` for three atoms, `1/60`
/// for four, `1/30` for five.
pub fn default_resolution(atoms: usize) -> f64 {
    match atoms {
        0 | 1 => 1.0,
        2 => 1.0 / 2000.0,
        3 => 1.0 / 200.0,
        4 => 1.0 / 60.0,
        _ => 1.0 / 30.0,
    }
}

/// All compositions of `k` into `m` nonnegative parts.
fn compositions(k: u32, m: usize) -> Vec<Vec<u32>> {
    fn rec(left: u32, slots: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if slots == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in 0..=left {
            cur.push(v);
            rec(left - v, slots - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, m, &mut Vec::with_capacity(m), &mut out);
    out
}

fn risk_of(loss: &LossTable, p: &[f64]) -> f64 {
    p.iter().zip(&loss.values).map(|(p, l)| p * l).sum()
}

/// Minimizes `R(P)` subject to `D_f(P‖Q) ≤ η` by exhaustive search on a
/// barycentric grid, followed by a local polish.
///
/// The polish moves mass between atom pairs toward the lower loss, pulling
/// the result back along the segment to `Q` whenever it leaves the
/// constraint set.
pub fn brute_force_constrained(
    gen: &DivergenceGenerator,
    support: &ModelSupport,
    loss: &LossTable,
    eta: f64,
    resolution: Option<f64>,
) -> Result<ConstrainedResult> {
    let m = support.len();
    if !(eta >= 0.0) {
        return Err(FdrError::InvalidInput(format!("divergence budget must be nonnegative, got {eta}")));
    }
    if m > MAX_CONSTRAINED_ATOMS {
        return Err(FdrError::InvalidInput(format!(
            "constrained oracle supports at most {MAX_CONSTRAINED_ATOMS} atoms, got {m}"
        )));
    }
    if loss.len() != m {
        return Err(FdrError::LengthMismatch { expected: m, got: loss.len() });
    }
    let q = support.weights();
    let res = resolution.unwrap_or_else(|| default_resolution(m));
    if !(res > 0.0 && res <= 1.0) {
        return Err(FdrError::InvalidInput(format!("grid resolution must lie in (0, 1], got {res}")));
    }
    let k = (1.0 / res).round().max(1.0) as u32;
    let feasible = |d: f64| d <= eta;

    let grid = compositions(k, m);
    let evaluated: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|c| {
            let p: Vec<f64> = c.iter().map(|&ci| ci as f64 / k as f64).collect();
            (risk_of(loss, &p), divergence(gen, q, &p))
        })
        .collect();

    let separable = support.is_separable(loss)?;
    if !separable {
        let risks: Vec<f64> = evaluated.iter().filter(|(_, d)| feasible(*d)).map(|(r, _)| *r).collect();
        let lo = risks.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = risks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo > 1e-12 {
            return Err(FdrError::Consistency(format!(
                "constant loss gave feasible risks spanning [{lo}, {hi}]"
            )));
        }
        return Ok(ConstrainedResult {
            weights: q.to_vec(),
            risk: risk_of(loss, q),
            divergence: 0.0,
            grid_points: grid.len(),
        });
    }

    // Q itself is always feasible
    let mut best = q.to_vec();
    let mut best_risk = risk_of(loss, q);
    for (c, &(r, d)) in grid.iter().zip(&evaluated) {
        if feasible(d) && r < best_risk {
            best_risk = r;
            best = c.iter().map(|&ci| ci as f64 / k as f64).collect();
        }
    }

    let project = |x: &[f64]| -> Vec<f64> {
        if feasible(divergence(gen, q, x)) {
            return x.to_vec();
        }
        let along = |s: f64| -> Vec<f64> { q.iter().zip(x).map(|(qi, xi)| qi + s * (xi - qi)).collect() };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if !(mid > lo && mid < hi) {
                break;
            }
            if feasible(divergence(gen, q, &along(mid))) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        along(lo)
    };

    let mut p = best;
    let mut current = best_risk;
    for _ in 0..5000 {
        let mut improved = false;
        for i in 0..m {
            for j in 0..m {
                if i == j || loss.values[i] >= loss.values[j] || p[j] <= 0.0 {
                    continue;
                }
                let moved = |t: f64| -> Vec<f64> {
                    let mut x = p.clone();
                    x[i] += t;
                    x[j] = (x[j] - t).max(0.0);
                    project(&x)
                };
                let h = |t: f64| risk_of(loss, &moved(t));
                let found = golden_section(h, |_| 1.0, 0.0, p[j], 0.0);
                let mut t = found.argmin;
                if h(p[j]) < h(t) {
                    t = p[j];
                }
                let cand = moved(t);
                let r = risk_of(loss, &cand);
                if r < current - 1e-15 {
                    p = cand;
                    current = r;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(ConstrainedResult { divergence: divergence(gen, q, &p), risk: current, weights: p, grid_points: grid.len() })
}
