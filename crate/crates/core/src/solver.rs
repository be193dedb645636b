//! Normalization function, posterior, duality gap, admissible range and
//! sensitivity of the regularized problem.
//!
//! For a regularization factor `λ > 0` the candidate density is
//! `ḟ⁻¹(−(β + L)/λ)` and the normalization residual
//! `k(β) = E_Q[ḟ⁻¹(−(β + L)/λ)] − 1` is nonincreasing in `β`. Its root
//! `N(λ)` is also the minimizer of the convex dual
//!
//! ```text
//! G(β) = λ·E_Q[f*(−(β + L)/λ)] + β,      G'(β) = −k(β).
//! ```
//!
//! [`FdrProblem::normalization_constant`] computes `N(λ)` both ways and
//! rejects the result when they disagree.
//!
//! When `ḟ` has a finite limit `a` at zero, `ḟ⁻¹` is extended by `0` below
//! `a`. This matches the clamped conjugate, so `G` stays differentiable. A
//! factor is admissible iff the root lies where every atom keeps a
//! nonnegative density, i.e. iff `E_Q[ḟ⁻¹(a + (max L − L)/λ)] ≤ 1`.

use rayon::prelude::*;

use crate::divergence::{DivergenceGenerator, ZeroLimit};
use crate::error::{FdrError, Result};
use crate::model_space::{LossTable, ModelSupport};
use crate::roots::{bisect_secant, bracket_decreasing, golden_section};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Bound on `|k(β̂)|`.
    pub tol: f64,
    /// Bound on the distance between the root and the dual minimizer.
    pub beta_agreement: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, beta_agreement: 1e-9 }
    }
}

/// Both computations of `N(λ)` with their iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationDiagnostics {
    pub beta_root: f64,
    pub beta_dual: f64,
    /// `k(β̂)` at the returned root.
    pub residual: f64,
    pub root_iterates: Vec<(f64, f64)>,
    pub dual_iterates: Vec<(f64, f64)>,
    pub dual_sign_steps: usize,
    /// The loss is constant on the support and the posterior is `Q`.
    pub nonseparable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    /// `dP/dQ` per atom.
    pub rnd: Vec<f64>,
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub n_of_lambda: f64,
    pub risk: f64,
    pub divergence: f64,
    pub eta: f64,
    pub nonseparable: bool,
}

impl Posterior {
    /// `R_z(P) + λ·D_f(P‖Q)`.
    pub fn primal(&self) -> f64 {
        self.risk + self.lambda * self.divergence
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub lambda: f64,
    /// Infimum of the admissible set; `0` when every `λ > 0` is admissible.
    pub lambda_star: Option<f64>,
    /// Whether `lambda_star` itself is admissible.
    pub boundary_included: bool,
    pub admissible: bool,
    /// Open interval of `β` keeping every dual argument inside the range of
    /// `ḟ`. Endpoints may be infinite.
    pub beta_interval: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub lambda: f64,
    pub admissible: bool,
    pub n: f64,
    pub risk: f64,
    pub divergence: f64,
    pub eta: f64,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub dn_dlambda: f64,
}

impl SweepRecord {
    fn inadmissible(lambda: f64) -> Self {
        let nan = f64::NAN;
        Self {
            lambda,
            admissible: false,
            n: nan,
            risk: nan,
            divergence: nan,
            eta: nan,
            primal: nan,
            dual: nan,
            gap: nan,
            dn_dlambda: nan,
        }
    }
}

/// Tolerance of the monotonicity verdict on `N`.
pub const MONOTONE_SLACK: f64 = 1e-9;

/// True iff `N` never drops by more than [`MONOTONE_SLACK`] between
/// successive admissible records.
pub fn n_monotone(records: &[SweepRecord]) -> bool {
    let ns: Vec<f64> = records.iter().filter(|r| r.admissible).map(|r| r.n).collect();
    ns.windows(2).all(|w| w[1] - w[0] >= -MONOTONE_SLACK)
}

/// One instance `(f, Q, L)`.
#[derive(Debug, Clone, Copy)]
pub struct FdrProblem<'a> {
    gen: DivergenceGenerator,
    support: &'a ModelSupport,
    loss: &'a LossTable,
    options: SolverOptions,
    min_loss: f64,
    max_loss: f64,
    mean_loss: f64,
    separable: bool,
}

impl<'a> FdrProblem<'a> {
    pub fn new(gen: DivergenceGenerator, support: &'a ModelSupport, loss: &'a LossTable) -> Result<Self> {
        let (min_loss, max_loss) = support.essential_extremes(loss)?;
        let mean_loss = support.expectation(&loss.values)?;
        Ok(Self {
            gen,
            support,
            loss,
            options: SolverOptions::default(),
            min_loss,
            max_loss,
            mean_loss,
            separable: min_loss < max_loss,
        })
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    pub fn generator(&self) -> DivergenceGenerator {
        self.gen
    }

    pub fn support(&self) -> &'a ModelSupport {
        self.support
    }

    pub fn loss(&self) -> &'a LossTable {
        self.loss
    }

    pub fn options(&self) -> SolverOptions {
        self.options
    }

    pub fn is_separable(&self) -> bool {
        self.separable
    }

    fn check_lambda(lambda: f64) -> Result<()> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(FdrError::InvalidInput(format!("lambda must be positive and finite, got {lambda}")));
        }
        Ok(())
    }

    /// `ḟ⁻¹` extended by `0` below the range of `ḟ` and `+∞` above it.
    fn inv_ext(&self, t: f64) -> f64 {
        match self.gen.fdot_inv(t) {
            Some(x) => x,
            None if t >= self.gen.fdot_sup() => f64::INFINITY,
            None => 0.0,
        }
    }

    /// `log E_Q[exp(−(L − min L)/λ)]`; every term is at most one.
    fn kl_log_partition(&self, lambda: f64) -> f64 {
        self.support
            .weights()
            .iter()
            .zip(&self.loss.values)
            .map(|(q, l)| q * (-(l - self.min_loss) / lambda).exp())
            .sum::<f64>()
            .ln()
    }

    /// `E_Q[ḟ⁻¹(−(β + L)/λ)]` with the extension of [`Self::inv_ext`].
    fn integral(&self, beta: f64, lambda: f64, log_z: f64) -> f64 {
        if self.gen.is_kl() {
            return (-(beta + self.min_loss) / lambda - 1.0 + log_z).exp();
        }
        self.support
            .weights()
            .iter()
            .zip(&self.loss.values)
            .map(|(q, l)| q * self.inv_ext(-(beta + l) / lambda))
            .sum()
    }

    fn dual_value(&self, beta: f64, lambda: f64, log_z: f64) -> f64 {
        if self.gen.is_kl() {
            // f* = ḟ⁻¹ for kl
            return lambda * self.integral(beta, lambda, log_z) + beta;
        }
        let mut s = 0.0;
        for (q, l) in self.support.weights().iter().zip(&self.loss.values) {
            let c = self.gen.conjugate(-(beta + l) / lambda);
            if c == f64::INFINITY {
                return f64::INFINITY;
            }
            s += q * c;
        }
        lambda * s + beta
    }

    fn log_z(&self, lambda: f64) -> f64 {
        if self.gen.is_kl() {
            self.kl_log_partition(lambda)
        } else {
            0.0
        }
    }

    /// `G(β) = λ·E_Q[f*(−(β + L)/λ)] + β`, `+∞` when any conjugate is.
    pub fn dual_objective(&self, beta: f64, lambda: f64) -> Result<f64> {
        Self::check_lambda(lambda)?;
        Ok(self.dual_value(beta, lambda, self.log_z(lambda)))
    }

    /// `G'(β) = 1 − E_Q[ḟ⁻¹(−(β + L)/λ)]`. Every argument must lie in the
    /// closure of the range of `ḟ`.
    pub fn dual_objective_derivative(&self, beta: f64, lambda: f64) -> Result<f64> {
        Self::check_lambda(lambda)?;
        for (atom, l) in self.support.atoms().iter().zip(&self.loss.values) {
            let t = -(beta + l) / lambda;
            if self.gen.fdot_inv(t).is_none() {
                return Err(FdrError::Domain { atom: atom.id.clone(), t });
            }
        }
        Ok(1.0 - self.integral(beta, lambda, self.log_z(lambda)))
    }

    /// Open interval of `β` with `−(β + L)/λ` inside the range of `ḟ` at
    /// every atom.
    pub fn beta_interval(&self, lambda: f64) -> (f64, f64) {
        let sup = self.gen.fdot_sup();
        let lo = if sup.is_finite() { -self.min_loss - lambda * sup } else { f64::NEG_INFINITY };
        let hi = match self.gen.zero_limit() {
            ZeroLimit::Finite(a) => -self.max_loss - a * lambda,
            ZeroLimit::MinusInfinity => f64::INFINITY,
        };
        (lo, hi)
    }

    /// `E_Q[ḟ⁻¹(a + (max L − L)/λ)]`, the residual plus one at the right end
    /// of the feasible interval. `None` without a finite zero limit.
    fn k_at_endpoint(&self, lambda: f64) -> Option<f64> {
        match self.gen.zero_limit() {
            ZeroLimit::Finite(a) => Some(
                self.support
                    .weights()
                    .iter()
                    .zip(&self.loss.values)
                    .map(|(q, l)| q * self.inv_ext(a + (self.max_loss - l) / lambda))
                    .sum(),
            ),
            ZeroLimit::MinusInfinity => None,
        }
    }

    pub fn is_admissible(&self, lambda: f64) -> bool {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return false;
        }
        match self.k_at_endpoint(lambda) {
            Some(k) => k <= 1.0,
            None => true,
        }
    }

    /// Infimum of the admissible set. Positive only for separable losses
    /// under a generator with a finite zero limit.
    pub fn lambda_star(&self) -> Result<f64> {
        if !self.separable || self.gen.zero_limit() == ZeroLimit::MinusInfinity {
            return Ok(0.0);
        }
        let r = |lambda: f64| self.k_at_endpoint(lambda).unwrap_or(f64::NAN) - 1.0;
        let (a, b) = bracket_decreasing(r, 1.0, 0.0, f64::INFINITY, 1.0)
            .ok_or_else(|| FdrError::Assumption("admissibility threshold could not be bracketed".into()))?;
        Ok(bisect_secant(r, a, b).root)
    }

    pub fn feasibility(&self, lambda: f64) -> Result<FeasibilityReport> {
        Self::check_lambda(lambda)?;
        let lambda_star = self.lambda_star()?;
        let boundary_included = lambda_star > 0.0
            && self
                .k_at_endpoint(lambda_star)
                .is_some_and(|k| k.is_finite() && (k - 1.0).abs() <= 1e-6);
        Ok(FeasibilityReport {
            lambda,
            lambda_star: Some(lambda_star),
            boundary_included,
            admissible: self.is_admissible(lambda),
            beta_interval: self.beta_interval(lambda),
        })
    }

    /// `N(λ)`, computed as the root of the normalization residual and as the
    /// minimizer of the dual objective.
    pub fn normalization_constant(&self, lambda: f64) -> Result<(f64, NormalizationDiagnostics)> {
        Self::check_lambda(lambda)?;
        if !self.separable {
            let beta = -self.min_loss - lambda * self.gen.fdot(1.0);
            let diag = NormalizationDiagnostics {
                beta_root: beta,
                beta_dual: beta,
                residual: 0.0,
                root_iterates: Vec::new(),
                dual_iterates: Vec::new(),
                dual_sign_steps: 0,
                nonseparable: true,
            };
            return Ok((beta, diag));
        }
        if !self.is_admissible(lambda) {
            return Err(FdrError::Infeasible { lambda, lambda_star: self.lambda_star()? });
        }
        let log_z = self.log_z(lambda);
        let (lo, _) = self.beta_interval(lambda);
        let residual = |b: f64| self.integral(b, lambda, log_z) - 1.0;
        // kl: the log of the integral is affine in β
        let root_fn = |b: f64| {
            if self.gen.is_kl() {
                log_z - 1.0 - (b + self.min_loss) / lambda
            } else {
                residual(b)
            }
        };
        let (a, b) = bracket_decreasing(root_fn, -self.mean_loss, lo, f64::INFINITY, lambda).ok_or_else(|| {
            FdrError::Assumption(format!("normalization residual has no sign change at lambda={lambda}"))
        })?;
        let root = bisect_secant(root_fn, a, b);
        let res = residual(root.root);
        if !(res.abs() <= self.options.tol || (root.collapsed && res.abs() <= self.options.tol.sqrt())) {
            let trace = root.iterates.iter().enumerate().map(|(i, &(_, r))| (i, r)).collect();
            return Err(FdrError::NonConvergence {
                message: format!("normalization residual {res} exceeds tolerance at lambda={lambda}"),
                trace,
            });
        }

        let width = (b - a).max(1e-3 * (1.0 + a.abs()));
        let mut da = a - width;
        if lo.is_finite() {
            da = da.max(0.5 * (lo + a));
        }
        let db = b + width;
        // G sums terms of this size; near the minimum they largely cancel
        let magnitude = root.root.abs()
            + lambda
                * self
                    .support
                    .weights()
                    .iter()
                    .zip(&self.loss.values)
                    .map(|(q, l)| q * self.gen.conjugate(-(root.root + l) / lambda).abs())
                    .sum::<f64>();
        let dual = golden_section(
            |x| self.dual_value(x, lambda, log_z),
            |x| -residual(x),
            da,
            db,
            magnitude,
        );
        if (dual.argmin - root.root).abs() > self.options.beta_agreement {
            return Err(FdrError::Consistency(format!(
                "root {} and dual minimizer {} disagree at lambda={lambda}",
                root.root, dual.argmin
            )));
        }
        let diag = NormalizationDiagnostics {
            beta_root: root.root,
            beta_dual: dual.argmin,
            residual: res,
            root_iterates: root.iterates,
            dual_iterates: dual.iterates,
            dual_sign_steps: dual.sign_steps,
            nonseparable: false,
        };
        Ok((root.root, diag))
    }

    pub fn posterior(&self, lambda: f64) -> Result<Posterior> {
        let (beta, diag) = self.normalization_constant(lambda)?;
        let q = self.support.weights();
        let l = &self.loss.values;
        if diag.nonseparable {
            return Ok(Posterior {
                rnd: vec![1.0; q.len()],
                weights: q.to_vec(),
                lambda,
                n_of_lambda: beta,
                risk: self.mean_loss,
                divergence: 0.0,
                eta: 0.0,
                nonseparable: true,
            });
        }
        let rnd: Vec<f64> = l.iter().map(|li| self.inv_ext(-(beta + li) / lambda)).collect();
        let weights: Vec<f64> = rnd.iter().zip(q).map(|(r, q)| r * q).collect();
        let risk = weights.iter().zip(l).map(|(w, l)| w * l).sum();
        let divergence = rnd
            .iter()
            .zip(q)
            .map(|(&r, q)| q * self.gen.f(r))
            .sum::<f64>()
            .max(0.0);
        Ok(Posterior {
            rnd,
            weights,
            lambda,
            n_of_lambda: beta,
            risk,
            divergence,
            eta: divergence,
            nonseparable: false,
        })
    }

    /// `−G(N(λ))`, the dual value at the optimum.
    pub fn dual_value_at(&self, post: &Posterior) -> f64 {
        -self.dual_value(post.n_of_lambda, post.lambda, self.log_z(post.lambda))
    }

    /// `|(R + λ·D) − (−G(N))|`.
    pub fn duality_gap(&self, post: &Posterior) -> f64 {
        (post.primal() - self.dual_value_at(post)).abs()
    }

    /// Weights proportional to `q / f̈(dP/dQ)`.
    pub fn tilted_measure(&self, post: &Posterior) -> Vec<f64> {
        let raw: Vec<f64> = post
            .rnd
            .iter()
            .zip(self.support.weights())
            .map(|(&r, q)| q / self.gen.fddot(r))
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    /// `N'(λ) = (N(λ) + E_{P^λ}[L]) / λ` with `P^λ` the tilted measure.
    pub fn normalization_derivative_at(&self, post: &Posterior) -> Result<f64> {
        let lambda_star = self.lambda_star()?;
        let at_boundary = lambda_star > 0.0 && post.lambda - lambda_star <= 1e-8 * lambda_star;
        if at_boundary || post.rnd.iter().any(|&r| r <= 0.0) {
            return Err(FdrError::Boundary { lambda: post.lambda });
        }
        let tilted = self.tilted_measure(post);
        let tilted_risk: f64 = tilted.iter().zip(&self.loss.values).map(|(w, l)| w * l).sum();
        Ok((post.n_of_lambda + tilted_risk) / post.lambda)
    }

    pub fn normalization_derivative(&self, lambda: f64) -> Result<f64> {
        let post = self.posterior(lambda)?;
        self.normalization_derivative_at(&post)
    }

    fn sweep_point(&self, lambda: f64) -> Result<SweepRecord> {
        let post = match self.posterior(lambda) {
            Ok(p) => p,
            Err(FdrError::Infeasible { .. }) => return Ok(SweepRecord::inadmissible(lambda)),
            Err(e) => return Err(e),
        };
        let dual = self.dual_value_at(&post);
        let primal = post.primal();
        let dn_dlambda = match self.normalization_derivative_at(&post) {
            Ok(d) => d,
            Err(FdrError::Boundary { .. }) => f64::NAN,
            Err(e) => return Err(e),
        };
        Ok(SweepRecord {
            lambda,
            admissible: true,
            n: post.n_of_lambda,
            risk: post.risk,
            divergence: post.divergence,
            eta: post.eta,
            primal,
            dual,
            gap: (primal - dual).abs(),
            dn_dlambda,
        })
    }

    /// Evaluates an ascending grid of factors in parallel. Inadmissible
    /// points are reported, not rejected.
    pub fn sweep(&self, lambdas: &[f64]) -> Result<Vec<SweepRecord>> {
        if let Some(&bad) = lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(FdrError::InvalidInput(format!("grid value {bad} is not a positive factor")));
        }
        if lambdas.windows(2).any(|w| w[1] < w[0]) {
            return Err(FdrError::InvalidInput("lambda grid must be sorted ascending".into()));
        }
        lambdas.par_iter().map(|&l| self.sweep_point(l)).collect()
    }
}
