//! Gauss rules used to reduce continuous reference measures to weighted atoms.

use std::f64::consts::PI;

use crate::error::{FdrError, Result};

pub const DEFAULT_NODES: usize = 64;

/// Gauss-Legendre nodes and weights for the uniform probability measure on
/// `[a, b]` (weights sum to one).
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(FdrError::InvalidInput(format!(
            "Gauss-Legendre needs n >= 1 and a finite interval, got n={n} [{a}, {b}]"
        )));
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let (xm, xl) = (0.5 * (a + b), 0.5 * (b - a));
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        x[i] = xm - xl * z;
        x[n - 1 - i] = xm + xl * z;
        // 2·xl/((1−z²)pp²) integrates dx; divide by the interval length
        w[i] = 1.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    Ok((x, w))
}

/// Gauss-Hermite nodes and weights for `N(mean, sd²)` (weights sum to one).
pub fn gauss_hermite(n: usize, mean: f64, sd: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || !(sd > 0.0) || !mean.is_finite() || !sd.is_finite() {
        return Err(FdrError::InvalidInput(format!(
            "Gauss-Hermite needs n >= 1 and sd > 0, got n={n} sd={sd}"
        )));
    }
    // π^{-1/4}
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (PIM4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-14 * z1.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let scale = PI.sqrt();
    let nodes = x.iter().map(|t| mean + std::f64::consts::SQRT_2 * sd * t).collect();
    let weights = w.iter().map(|v| v / scale).collect();
    Ok((nodes, weights))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(nodes: &[f64], weights: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        nodes.iter().zip(weights).map(|(&x, &w)| w * f(x)).sum()
    }

    #[test]
    fn legendre_moments() {
        let (x, w) = gauss_legendre(DEFAULT_NODES, 0.0, 2.0).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        // E[X] = 1, E[X²] = 4/3, E[e^X] = (e² − 1)/2 for X ~ U(0, 2)
        assert!((integrate(&x, &w, |t| t) - 1.0).abs() < 1e-13);
        assert!((integrate(&x, &w, |t| t * t) - 4.0 / 3.0).abs() < 1e-13);
        let e2 = (2.0f64.exp() - 1.0) / 2.0;
        assert!((integrate(&x, &w, f64::exp) - e2).abs() < 1e-12);
    }

    #[test]
    fn hermite_moments() {
        for n in [1, 2, 5, 20, DEFAULT_NODES] {
            let (x, w) = gauss_hermite(n, 1.5, 0.5).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12, "n={n}");
            assert!((integrate(&x, &w, |t| t) - 1.5).abs() < 1e-12, "n={n}");
        }
        let (x, w) = gauss_hermite(DEFAULT_NODES, 1.5, 0.5).unwrap();
        // Var = 0.25; E[e^X] = e^{μ + σ²/2}
        let var = integrate(&x, &w, |t| (t - 1.5) * (t - 1.5));
        assert!((var - 0.25).abs() < 1e-12);
        assert!((integrate(&x, &w, f64::exp) - (1.5f64 + 0.125).exp()).abs() < 1e-11);
    }

    #[test]
    fn bad_parameters() {
        assert!(gauss_legendre(0, 0.0, 1.0).is_err());
        assert!(gauss_legendre(4, 1.0, 1.0).is_err());
        assert!(gauss_hermite(4, 0.0, 0.0).is_err());
    }
}
