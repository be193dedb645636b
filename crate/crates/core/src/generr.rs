//! Exact generalization error of algorithms on finite data-generating laws.
//!
//! The generalization error of an algorithm `z ↦ P_z` under a law `P_Z` is
//!
//! ```text
//! Σ_z Σ_u P_Z(z)·P_Z(u)·[R_u(P_z) − R_z(P_z)]  =  Σ_z P_Z(z)·[R_z(P̄) − R_z(P_z)]
//! ```
//!
//! with `P̄ = Σ_z P_Z(z)·P_z` the marginal model law. Besides the double sum,
//! three closed-form routes are provided that express each gap through the
//! regularized posterior of dataset `z`.

use rayon::prelude::*;

use crate::divergence::DivergenceGenerator;
use crate::error::{FdrError, Result};
use crate::learning::{StochasticAlgorithm, TabulatedLaw};
use crate::model_space::{LossTable, ModelSupport};
use crate::solver::{FdrProblem, Posterior};

/// Tolerance of the decomposition identity checked by the direct route.
pub const DECOMPOSITION_TOLERANCE: f64 = 1e-12;

/// Tolerance of the agreement between routes.
pub const ROUTE_TOLERANCE: f64 = 1e-9;

fn risk(loss: &LossTable, p: &[f64]) -> Result<f64> {
    if p.len() != loss.len() {
        return Err(FdrError::LengthMismatch { expected: loss.len(), got: p.len() });
    }
    Ok(p.iter().zip(&loss.values).map(|(p, l)| p * l).sum())
}

/// `R_z(P1) − R_z(P2)`.
pub fn gap(loss: &LossTable, p1: &[f64], p2: &[f64]) -> Result<f64> {
    Ok(risk(loss, p1)? - risk(loss, p2)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalLaw {
    pub weights: Vec<f64>,
    /// Atoms that receive no marginal mass.
    pub missing_atoms: Vec<usize>,
}

impl MarginalLaw {
    pub fn covers_support(&self) -> bool {
        self.missing_atoms.is_empty()
    }
}

/// `P̄ = Σ_z P_Z(z)·P_z`. When every conditional is the same vector it is
/// returned unchanged.
pub fn marginal_model_law(alg: &StochasticAlgorithm, probabilities: &[f64]) -> Result<MarginalLaw> {
    if alg.len() != probabilities.len() {
        return Err(FdrError::LengthMismatch { expected: probabilities.len(), got: alg.len() });
    }
    let weights = if alg.is_data_independent() {
        alg.conditional(0).to_vec()
    } else {
        let m = alg.conditional(0).len();
        let mut w = vec![0.0; m];
        for (row, p) in alg.conditionals().iter().zip(probabilities) {
            for (wi, ri) in w.iter_mut().zip(row) {
                *wi += p * ri;
            }
        }
        w
    };
    let missing_atoms = weights.iter().enumerate().filter(|(_, &w)| w <= 0.0).map(|(i, _)| i).collect();
    Ok(MarginalLaw { weights, missing_atoms })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectValue {
    /// The double sum over (training, test) dataset pairs.
    pub value: f64,
    /// `Σ_z P_Z(z)·[R_z(P̄) − R_z(P_z)]`.
    pub decomposition: f64,
}

fn check_alignment(alg: &StochasticAlgorithm, law: &TabulatedLaw) -> Result<()> {
    if alg.len() != law.len() {
        return Err(FdrError::LengthMismatch { expected: law.len(), got: alg.len() });
    }
    if alg.conditional(0).len() != law.atoms() {
        return Err(FdrError::LengthMismatch { expected: law.atoms(), got: alg.conditional(0).len() });
    }
    Ok(())
}

/// Generalization error by enumerating all (training, test) pairs.
///
/// Pairs `(z, u)` and `(u, z)` are added together so that a data-independent
/// algorithm yields exactly zero. Fails if the marginal decomposition
/// differs by more than [`DECOMPOSITION_TOLERANCE`].
pub fn generalization_error_direct(alg: &StochasticAlgorithm, law: &TabulatedLaw) -> Result<DirectValue> {
    check_alignment(alg, law)?;
    let p = law.probabilities();
    let tables = law.tables();
    let n = law.len();
    // r[u][z] = R_u(P_z)
    let mut r = vec![vec![0.0; n]; n];
    for (u, table) in tables.iter().enumerate() {
        for z in 0..n {
            r[u][z] = risk(table, alg.conditional(z))?;
        }
    }
    let mut value = 0.0;
    for z in 0..n {
        for u in (z + 1)..n {
            let forward = r[u][z] - r[z][z];
            let backward = r[z][u] - r[u][u];
            value += p[z] * p[u] * (forward + backward);
        }
    }
    let marginal = marginal_model_law(alg, p)?;
    let mut decomposition = 0.0;
    for z in 0..n {
        decomposition += p[z] * gap(&tables[z], &marginal.weights, alg.conditional(z))?;
    }
    if (value - decomposition).abs() > DECOMPOSITION_TOLERANCE {
        return Err(FdrError::Consistency(format!(
            "double sum {value} differs from marginal decomposition {decomposition}"
        )));
    }
    Ok(DirectValue { value, decomposition })
}

/// `R_z(P) − R_z(P*)` written through the posterior `P*` of dataset `z`:
/// `λ·Σ_θ q(θ)·(1 − dP/dP*(θ))·(f(dP*/dQ(θ)) + f*(−(L(θ) + N)/λ))`.
pub fn gap_via_conjugate(
    gen: &DivergenceGenerator,
    support: &ModelSupport,
    loss: &LossTable,
    p: &[f64],
    post: &Posterior,
) -> Result<f64> {
    let q = support.weights();
    if p.len() != q.len() {
        return Err(FdrError::LengthMismatch { expected: q.len(), got: p.len() });
    }
    let lambda = post.lambda;
    let mut s = 0.0;
    for i in 0..q.len() {
        let r = post.rnd[i];
        let t = -(loss.values[i] + post.n_of_lambda) / lambda;
        let bracket = gen.f(r) + gen.conjugate(t);
        s += (q[i] - p[i] / r) * bracket;
    }
    Ok(lambda * s)
}

/// Posterior of every dataset of `law` at `lambda`, solved in parallel.
pub fn posterior_family(
    gen: &DivergenceGenerator,
    lambda: f64,
    support: &ModelSupport,
    law: &TabulatedLaw,
) -> Result<Vec<Posterior>> {
    law.tables()
        .par_iter()
        .map(|t| FdrProblem::new(*gen, support, t)?.posterior(lambda))
        .collect()
}

/// The regularized posterior as an extensional algorithm.
pub fn fdr_algorithm(posteriors: &[Posterior]) -> Result<StochasticAlgorithm> {
    StochasticAlgorithm::new(posteriors.iter().map(|p| p.weights.clone()).collect())
}

fn theorem5_from(
    alg: &StochasticAlgorithm,
    law: &TabulatedLaw,
    gen: &DivergenceGenerator,
    support: &ModelSupport,
    posteriors: &[Posterior],
) -> Result<f64> {
    check_alignment(alg, law)?;
    let marginal = marginal_model_law(alg, law.probabilities())?;
    if !marginal.covers_support() {
        return Err(FdrError::Assumption(format!(
            "marginal model law misses atoms {:?} of the reference support",
            marginal.missing_atoms
        )));
    }
    let q = support.weights();
    let mut total = 0.0;
    for (z, post) in posteriors.iter().enumerate() {
        let table = &law.tables()[z];
        let cond = alg.conditional(z);
        let mut s = 0.0;
        for i in 0..q.len() {
            let r = post.rnd[i];
            let t = -(table.values[i] + post.n_of_lambda) / post.lambda;
            let bracket = gen.f(r) + gen.conjugate(t);
            let star = q[i] * r;
            // conditional minus marginal: the gap is training risk subtracted
            // from marginal risk, so the conditional term carries the plus sign
            s += q[i] * bracket * (cond[i] / star - marginal.weights[i] / star);
        }
        total += law.probabilities()[z] * post.lambda * s;
    }
    Ok(total)
}

/// Generalization error of any algorithm through the posteriors of the
/// regularized problem at a caller-chosen `lambda`.
pub fn generalization_error_theorem5(
    alg: &StochasticAlgorithm,
    law: &TabulatedLaw,
    gen: &DivergenceGenerator,
    lambda: f64,
    support: &ModelSupport,
) -> Result<f64> {
    let posteriors = posterior_family(gen, lambda, support, law)?;
    theorem5_from(alg, law, gen, support, &posteriors)
}

fn fdr_route_from(gen: &DivergenceGenerator, law: &TabulatedLaw, posteriors: &[Posterior]) -> Result<f64> {
    let alg = fdr_algorithm(posteriors)?;
    let marginal = marginal_model_law(&alg, law.probabilities())?;
    let mut total = 0.0;
    for (post, p) in posteriors.iter().zip(law.probabilities()) {
        let mut own = 0.0;
        let mut mixed = 0.0;
        for i in 0..post.rnd.len() {
            let d = gen.fdot(post.rnd[i]);
            own += post.weights[i] * d;
            mixed += marginal.weights[i] * d;
        }
        total += p * post.lambda * (own - mixed);
    }
    Ok(total)
}

/// Generalization error of the regularized posterior itself:
/// `λ·Σ_z P_Z(z)·(E_{P*_z}[ḟ(dP*_z/dQ)] − E_{P̄}[ḟ(dP*_z/dQ)])`.
pub fn generalization_error_fdr(
    gen: &DivergenceGenerator,
    lambda: f64,
    support: &ModelSupport,
    law: &TabulatedLaw,
) -> Result<f64> {
    let posteriors = posterior_family(gen, lambda, support, law)?;
    fdr_route_from(gen, law, &posteriors)
}

fn gibbs_from(law: &TabulatedLaw, posteriors: &[Posterior]) -> Result<f64> {
    let alg = fdr_algorithm(posteriors)?;
    let marginal = marginal_model_law(&alg, law.probabilities())?;
    let mut total = 0.0;
    for ((post, table), p) in posteriors.iter().zip(law.tables()).zip(law.probabilities()) {
        let mut own = 0.0;
        let mut mixed = 0.0;
        for i in 0..post.rnd.len() {
            // log dP*/dQ for the Gibbs posterior
            let log_rnd = -(post.n_of_lambda + table.values[i]) / post.lambda - 1.0;
            own += post.weights[i] * log_rnd;
            mixed += marginal.weights[i] * log_rnd;
        }
        total += p * post.lambda * (own - mixed);
    }
    Ok(total)
}

/// Log form of the generalization error of the Gibbs posterior
/// `dP*/dQ ∝ exp(−L/λ)`.
pub fn gibbs_generalization_error(lambda: f64, support: &ModelSupport, law: &TabulatedLaw) -> Result<f64> {
    let posteriors = posterior_family(&DivergenceGenerator::kl(), lambda, support, law)?;
    gibbs_from(law, &posteriors)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenErrRow {
    pub dataset_id: String,
    pub n: f64,
    pub risk_train: f64,
    pub risk_marginal: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenErrReport {
    pub direct: f64,
    pub via_theorem5: f64,
    /// Only for the regularized posterior itself.
    pub via_theorem6: Option<f64>,
    /// Only for the regularized posterior under kl.
    pub gibbs_form: Option<f64>,
    pub rows: Vec<GenErrRow>,
}

impl GenErrReport {
    /// Route values under their CSV labels `direct`, `theorem5`,
    /// `theorem6` and `gibbs`.
    pub fn routes(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("direct", Some(self.direct)),
            ("theorem5", Some(self.via_theorem5)),
            ("theorem6", self.via_theorem6),
            ("gibbs", self.gibbs_form),
        ]
    }

    /// Largest absolute difference between any two populated routes.
    pub fn max_disagreement(&self) -> f64 {
        let vals: Vec<f64> = self.routes().into_iter().filter_map(|(_, v)| v).collect();
        let mut worst: f64 = 0.0;
        for a in &vals {
            for b in &vals {
                let d = (a - b).abs();
                worst = if d.is_nan() { f64::INFINITY } else { worst.max(d) };
            }
        }
        worst
    }

    pub fn routes_agree(&self, tol: f64) -> bool {
        self.max_disagreement() <= tol
    }
}

/// Builds the full report. With `alg = None` the algorithm is the
/// regularized posterior at `lambda`; otherwise `lambda` only parametrizes
/// the closed-form route.
pub fn generalization_report(
    gen: &DivergenceGenerator,
    lambda: f64,
    support: &ModelSupport,
    law: &TabulatedLaw,
    alg: Option<&StochasticAlgorithm>,
) -> Result<GenErrReport> {
    if law.atoms() != support.len() {
        return Err(FdrError::LengthMismatch { expected: support.len(), got: law.atoms() });
    }
    let posteriors = posterior_family(gen, lambda, support, law)?;
    let owned;
    let algorithm = match alg {
        Some(a) => a,
        None => {
            owned = fdr_algorithm(&posteriors)?;
            &owned
        }
    };
    let direct = generalization_error_direct(algorithm, law)?;
    let via_theorem5 = theorem5_from(algorithm, law, gen, support, &posteriors)?;
    let (via_theorem6, gibbs_form) = if alg.is_none() {
        let t6 = fdr_route_from(gen, law, &posteriors)?;
        let gibbs = if gen.is_kl() { Some(gibbs_from(law, &posteriors)?) } else { None };
        (Some(t6), gibbs)
    } else {
        (None, None)
    };
    let marginal = marginal_model_law(algorithm, law.probabilities())?;
    let mut rows = Vec::with_capacity(law.len());
    for (z, table) in law.tables().iter().enumerate() {
        let risk_train = risk(table, algorithm.conditional(z))?;
        let risk_marginal = risk(table, &marginal.weights)?;
        rows.push(GenErrRow {
            dataset_id: law.ids()[z].clone(),
            n: posteriors[z].n_of_lambda,
            risk_train,
            risk_marginal,
            gap: risk_marginal - risk_train,
        });
    }
    Ok(GenErrReport { direct: direct.value, via_theorem5, via_theorem6, gibbs_form, rows })
}
