//! Empirical risk minimization with f-divergence regularization.
//!
//! Given a reference measure `Q` over models (a weighted atom list), an
//! empirical-risk table `L` and a regularization factor `λ`, the problem
//!
//! ```text
//! minimize  E_P[L] + λ·D_f(P‖Q)   over probability measures P ≪ Q
//! ```
//!
//! has the unique solution `dP/dQ = ḟ⁻¹(−(β + L)/λ)`, where `β = N(λ)` is
//! the normalization constant. This crate computes `N(λ)` twice (root of the
//! normalization residual and minimizer of the convex dual), the posterior,
//! the duality gap, the admissible range of `λ`, the sensitivity `dN/dλ`, and
//! exact generalization errors of algorithms on finite data-generating laws.
//!
//! Modules:
//! - [`divergence`]: generator catalog and conjugates.
//! - [`model_space`]: reference measures, loss tables, quadrature.
//! - [`learning`]: datasets, losses and finite laws.
//! - [`solver`]: normalization constant, posterior, feasibility, sweeps.
//! - [`generr`]: generalization error by enumeration and closed-form routes.
//! - [`oracle`]: brute-force simplex solvers for cross-checks.
//! - [`io`]: CSV schemas shared with the command-line driver.

pub mod divergence;
pub mod error;
pub mod generr;
pub mod io;
pub mod learning;
pub mod model_space;
pub mod oracle;
pub mod quadrature;
pub mod roots;
pub mod solver;

pub use divergence::{make_generator, DivergenceGenerator, GeneratorKind, ZeroLimit};
pub use error::{FdrError, Result};
pub use generr::GenErrReport;
pub use learning::{DataGeneratingLaw, LabeledDataset, LossSpec, StochasticAlgorithm, TabulatedLaw};
pub use model_space::{Atom, LossTable, ModelSupport};
pub use solver::{FdrProblem, FeasibilityReport, Posterior, SolverOptions, SweepRecord};
