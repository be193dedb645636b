//! Catalog of f-divergence generators.
//!
//! Every generator `f` is strictly convex on `(0, ∞)` with `f(1) = 0` and
//! carries closed forms for its derivative `ḟ`, the inverse derivative
//! `ḟ⁻¹`, the second derivative `f̈` and the Legendre-Fenchel conjugate `f*`.
//!
//! | key            | f(x)                                   | lim_{x→0⁺} ḟ(x) |
//! |----------------|----------------------------------------|-----------------|
//! | `kl`           | x log x                                | −∞              |
//! | `reverse_kl`   | −log x                                 | −∞              |
//! | `chi_squared`  | (x − 1)²                               | −2              |
//! | `hellinger_sq` | (√x − 1)²                              | −∞              |
//! | `alpha:<a>`    | (x^a − 1 − a(x − 1)) / (a(a − 1))      | −1/(a−1) if a>1 |

use std::fmt;
use std::str::FromStr;

use crate::error::{FdrError, Result};

/// Limit of `ḟ(x)` as `x → 0⁺`.
///
/// A finite limit `a` means `ḟ⁻¹` vanishes at `a`, so feasible dual arguments
/// are bounded below and a positive minimum regularization factor can exist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZeroLimit {
    Finite(f64),
    MinusInfinity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeneratorKind {
    Kl,
    ReverseKl,
    ChiSquared,
    HellingerSq,
    Alpha(f64),
}

/// A convex generator together with its closed-form companions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceGenerator {
    kind: GeneratorKind,
}

impl DivergenceGenerator {
    pub fn new(kind: GeneratorKind) -> Result<Self> {
        if let GeneratorKind::Alpha(a) = kind {
            if !a.is_finite() || a == 0.0 || a == 1.0 {
                return Err(FdrError::InvalidAlpha(a));
            }
        }
        Ok(Self { kind })
    }

    pub fn kl() -> Self {
        Self { kind: GeneratorKind::Kl }
    }

    pub fn reverse_kl() -> Self {
        Self { kind: GeneratorKind::ReverseKl }
    }

    pub fn chi_squared() -> Self {
        Self { kind: GeneratorKind::ChiSquared }
    }

    pub fn hellinger_sq() -> Self {
        Self { kind: GeneratorKind::HellingerSq }
    }

    pub fn alpha(a: f64) -> Result<Self> {
        Self::new(GeneratorKind::Alpha(a))
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn is_kl(&self) -> bool {
        self.kind == GeneratorKind::Kl
    }

    /// Catalog key, e.g. `kl` or `alpha:2`.
    pub fn name(&self) -> String {
        match self.kind {
            GeneratorKind::Kl => "kl".into(),
            GeneratorKind::ReverseKl => "reverse_kl".into(),
            GeneratorKind::ChiSquared => "chi_squared".into(),
            GeneratorKind::HellingerSq => "hellinger_sq".into(),
            GeneratorKind::Alpha(a) => format!("alpha:{a}"),
        }
    }

    /// The generator `f` on `(0, ∞)`. At `x = 0` the right limit is returned,
    /// which may be `+∞`.
    pub fn f(&self, x: f64) -> f64 {
        if x == 0.0 {
            return self.f_at_zero();
        }
        match self.kind {
            GeneratorKind::Kl => x * x.ln(),
            GeneratorKind::ReverseKl => -x.ln(),
            GeneratorKind::ChiSquared => (x - 1.0) * (x - 1.0),
            GeneratorKind::HellingerSq => {
                let s = x.sqrt() - 1.0;
                s * s
            }
            GeneratorKind::Alpha(a) => (x.powf(a) - 1.0 - a * (x - 1.0)) / (a * (a - 1.0)),
        }
    }

    /// `lim_{x→0⁺} f(x)`.
    pub fn f_at_zero(&self) -> f64 {
        match self.kind {
            GeneratorKind::Kl => 0.0,
            GeneratorKind::ReverseKl => f64::INFINITY,
            GeneratorKind::ChiSquared | GeneratorKind::HellingerSq => 1.0,
            GeneratorKind::Alpha(a) if a > 0.0 => 1.0 / a,
            GeneratorKind::Alpha(_) => f64::INFINITY,
        }
    }

    pub fn fdot(&self, x: f64) -> f64 {
        match self.kind {
            GeneratorKind::Kl => x.ln() + 1.0,
            GeneratorKind::ReverseKl => -1.0 / x,
            GeneratorKind::ChiSquared => 2.0 * (x - 1.0),
            GeneratorKind::HellingerSq => 1.0 - 1.0 / x.sqrt(),
            GeneratorKind::Alpha(a) => (x.powf(a - 1.0) - 1.0) / (a - 1.0),
        }
    }

    pub fn fddot(&self, x: f64) -> f64 {
        match self.kind {
            GeneratorKind::Kl => 1.0 / x,
            GeneratorKind::ReverseKl => 1.0 / (x * x),
            GeneratorKind::ChiSquared => 2.0,
            GeneratorKind::HellingerSq => 0.5 * x.powf(-1.5),
            GeneratorKind::Alpha(a) => x.powf(a - 2.0),
        }
    }

    pub fn zero_limit(&self) -> ZeroLimit {
        match self.kind {
            GeneratorKind::ChiSquared => ZeroLimit::Finite(-2.0),
            GeneratorKind::Alpha(a) if a > 1.0 => ZeroLimit::Finite(-1.0 / (a - 1.0)),
            _ => ZeroLimit::MinusInfinity,
        }
    }

    /// Supremum of the range of `ḟ`; `ḟ⁻¹(t) → ∞` as `t` approaches it.
    pub fn fdot_sup(&self) -> f64 {
        match self.kind {
            GeneratorKind::Kl | GeneratorKind::ChiSquared => f64::INFINITY,
            GeneratorKind::ReverseKl => 0.0,
            GeneratorKind::HellingerSq => 1.0,
            GeneratorKind::Alpha(a) if a > 1.0 => f64::INFINITY,
            GeneratorKind::Alpha(a) => 1.0 / (1.0 - a),
        }
    }

    /// Infimum of the range of `ḟ` (the zero limit, possibly `−∞`).
    pub fn fdot_inf(&self) -> f64 {
        match self.zero_limit() {
            ZeroLimit::Finite(a) => a,
            ZeroLimit::MinusInfinity => f64::NEG_INFINITY,
        }
    }

    /// `ḟ⁻¹(t)`, or `None` when `t` lies outside the closure of the range of
    /// `ḟ`. At a finite zero limit the continuous extension `0` is returned.
    pub fn fdot_inv(&self, t: f64) -> Option<f64> {
        if t.is_nan() || t >= self.fdot_sup() {
            return None;
        }
        let lo = self.fdot_inf();
        if t < lo {
            return None;
        }
        if t == lo {
            return Some(0.0);
        }
        let x = match self.kind {
            GeneratorKind::Kl => (t - 1.0).exp(),
            GeneratorKind::ReverseKl => -1.0 / t,
            GeneratorKind::ChiSquared => 1.0 + 0.5 * t,
            GeneratorKind::HellingerSq => {
                let s = 1.0 - t;
                1.0 / (s * s)
            }
            GeneratorKind::Alpha(a) => (1.0 + (a - 1.0) * t).powf(1.0 / (a - 1.0)),
        };
        Some(x)
    }

    /// Legendre-Fenchel conjugate `sup_{x>0} (t·x − f(x))`.
    ///
    /// Below a finite zero limit the supremum is approached as `x → 0⁺` and
    /// equals `−f(0)`. Above the range of `ḟ` the result is `+∞`.
    pub fn conjugate(&self, t: f64) -> f64 {
        if t.is_nan() {
            return f64::NAN;
        }
        if let ZeroLimit::Finite(a) = self.zero_limit() {
            if t <= a {
                return -self.f_at_zero();
            }
        }
        let sup = self.fdot_sup();
        if t >= sup {
            // alpha < 0 keeps a finite value exactly at the endpoint
            return match self.kind {
                GeneratorKind::Alpha(a) if a < 0.0 && t == sup => -1.0 / a,
                _ => f64::INFINITY,
            };
        }
        match self.kind {
            GeneratorKind::Kl => (t - 1.0).exp(),
            GeneratorKind::ReverseKl => -1.0 - (-t).ln(),
            GeneratorKind::ChiSquared => t + 0.25 * t * t,
            GeneratorKind::HellingerSq => t / (1.0 - t),
            GeneratorKind::Alpha(a) => ((1.0 + (a - 1.0) * t).powf(a / (a - 1.0)) - 1.0) / a,
        }
    }

    /// Derivative of `ḟ⁻¹` at `t`, i.e. `1 / f̈(ḟ⁻¹(t))`.
    pub fn fdot_inv_derivative(&self, t: f64) -> Option<f64> {
        self.fdot_inv(t).map(|x| 1.0 / self.fddot(x))
    }
}

impl fmt::Display for DivergenceGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for DivergenceGenerator {
    type Err = FdrError;

    /// Parses the configuration key: `kl`, `reverse_kl`, `chi_squared`,
    /// `hellinger_sq` or `alpha:<float>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.split_once(':') {
            Some(("alpha", a)) => {
                let a: f64 = a
                    .trim()
                    .parse()
                    .map_err(|_| FdrError::UnknownGenerator(s.to_string()))?;
                make_generator("alpha", Some(a))
            }
            Some(_) => Err(FdrError::UnknownGenerator(s.to_string())),
            None => make_generator(s, None),
        }
    }
}

/// Instantiates a catalog member. `alpha` must be given exactly when
/// `name == "alpha"`.
pub fn make_generator(name: &str, alpha: Option<f64>) -> Result<DivergenceGenerator> {
    let kind = match (name, alpha) {
        ("kl", None) => GeneratorKind::Kl,
        ("reverse_kl", None) => GeneratorKind::ReverseKl,
        ("chi_squared", None) => GeneratorKind::ChiSquared,
        ("hellinger_sq", None) => GeneratorKind::HellingerSq,
        ("alpha", Some(a)) => GeneratorKind::Alpha(a),
        ("alpha", None) => {
            return Err(FdrError::InvalidInput("alpha generator needs a value".into()))
        }
        (other, _) => return Err(FdrError::UnknownGenerator(other.to_string())),
    };
    DivergenceGenerator::new(kind)
}

/// Same as [`DivergenceGenerator::conjugate`], as a free function.
pub fn conjugate(gen: &DivergenceGenerator, t: f64) -> f64 {
    gen.conjugate(t)
}

pub fn classify_zero_limit(gen: &DivergenceGenerator) -> ZeroLimit {
    gen.zero_limit()
}

/// Per-point outcome of [`check_generator`]. Errors are relative to
/// `max(1, |reference|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCheck {
    pub x: f64,
    pub in_domain: bool,
    pub inverse_error: f64,
    pub fenchel_error: f64,
    pub fdot_fd_error: f64,
    pub fddot_fd_error: f64,
}

impl PointCheck {
    pub fn max_error(&self) -> f64 {
        self.inverse_error
            .max(self.fenchel_error)
            .max(self.fdot_fd_error)
            .max(self.fddot_fd_error)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformanceReport {
    pub generator: String,
    pub points: Vec<PointCheck>,
    pub tolerance: f64,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        !self.points.is_empty()
            && self
                .points
                .iter()
                .all(|p| p.in_domain && p.max_error() < self.tolerance)
    }

    /// Largest absolute Fenchel residual `|f*(ḟ(x)) + f(x) − x·ḟ(x)|`.
    pub fn max_fenchel_residual(&self) -> f64 {
        self.points
            .iter()
            .filter(|p| p.in_domain)
            .map(|p| p.fenchel_error)
            .fold(0.0, f64::max)
    }
}

pub const CONFORMANCE_TOLERANCE: f64 = 1e-6;

fn rel(err: f64, reference: f64) -> f64 {
    err.abs() / reference.abs().max(1.0)
}

/// Checks inverse, conjugate and derivative identities of `gen` on `grid`.
///
/// Derivatives are compared against central differences with step
/// `h = 1e-6·max(1, |x|)`, shrunk to `x·1e-3` when `x − h` would leave the
/// domain. Points outside `(0, ∞)` are flagged rather than failing the call.
pub fn check_generator(gen: &DivergenceGenerator, grid: &[f64]) -> ConformanceReport {
    let points = grid
        .iter()
        .map(|&x| {
            if !(x > 0.0 && x.is_finite()) {
                return PointCheck {
                    x,
                    in_domain: false,
                    inverse_error: f64::NAN,
                    fenchel_error: f64::NAN,
                    fdot_fd_error: f64::NAN,
                    fddot_fd_error: f64::NAN,
                };
            }
            let t = gen.fdot(x);
            let inverse_error = match gen.fdot_inv(t) {
                Some(back) => rel(back - x, x),
                None => f64::INFINITY,
            };
            // f*(ḟ(x)) = x·ḟ(x) − f(x)
            let fenchel_error = (gen.conjugate(t) + gen.f(x) - x * t).abs();

            let mut h = 1e-6 * x.abs().max(1.0);
            if x - h <= 0.0 {
                h = x * 1e-3;
            }
            let fd1 = (gen.f(x + h) - gen.f(x - h)) / (2.0 * h);
            let fd2 = (gen.fdot(x + h) - gen.fdot(x - h)) / (2.0 * h);
            PointCheck {
                x,
                in_domain: true,
                inverse_error,
                fenchel_error,
                fdot_fd_error: rel(fd1 - t, t),
                fddot_fd_error: rel(fd2 - gen.fddot(x), gen.fddot(x)),
            }
        })
        .collect();
    ConformanceReport {
        generator: gen.name(),
        points,
        tolerance: CONFORMANCE_TOLERANCE,
    }
}

/// `n` log-spaced points in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}

/// Generators exercised by the test and verification harnesses.
pub fn catalog() -> Vec<DivergenceGenerator> {
    vec![
        DivergenceGenerator::kl(),
        DivergenceGenerator::reverse_kl(),
        DivergenceGenerator::chi_squared(),
        DivergenceGenerator::hellinger_sq(),
        DivergenceGenerator::alpha(2.0).unwrap(),
        DivergenceGenerator::alpha(0.5).unwrap(),
        DivergenceGenerator::alpha(3.0).unwrap(),
        DivergenceGenerator::alpha(-1.0).unwrap(),
    ]
}
