//! Reference measures over models as weighted atoms, and the loss geometry
//! (essential extremes, Rashomon mass, separability) restricted to their
//! support.

use crate::error::{FdrError, Result};
use crate::quadrature;

/// Atoms with weight below this are dropped at construction.
pub const PRUNE_THRESHOLD: f64 = 1e-14;

/// Tolerance on the total mass of user-supplied weights.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// A model: an identifier plus optional real coordinates (parameters).
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub id: String,
    pub coords: Vec<f64>,
}

impl Atom {
    pub fn new(id: impl Into<String>, coords: Vec<f64>) -> Self {
        Self { id: id.into(), coords }
    }

    pub fn named(id: impl Into<String>) -> Self {
        Self { id: id.into(), coords: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    GaussHermite,
    GaussLegendre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportKind {
    Finite,
    Quadrature { rule: QuadratureRule, nodes: usize },
}

/// A probability measure `Q` over models, stored as strictly positive atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSupport {
    atoms: Vec<Atom>,
    weights: Vec<f64>,
    kind: SupportKind,
}

impl ModelSupport {
    /// Builds a finite support. Weights must be nonnegative and sum to one;
    /// atoms with weight below [`PRUNE_THRESHOLD`] are dropped and the rest
    /// renormalized.
    pub fn finite(atoms: Vec<Atom>, weights: Vec<f64>) -> Result<Self> {
        let keep = validate_weights(&weights, atoms.len())?;
        let mut kept_atoms = Vec::with_capacity(keep.len());
        let mut kept_weights = Vec::with_capacity(keep.len());
        for (i, (a, w)) in atoms.into_iter().zip(weights).enumerate() {
            if keep[i] {
                kept_atoms.push(a);
                kept_weights.push(w);
            }
        }
        Ok(Self::from_parts(kept_atoms, kept_weights, SupportKind::Finite))
    }

    /// Builds a finite support together with its aligned loss table, pruning
    /// both consistently.
    pub fn with_losses(atoms: Vec<Atom>, weights: Vec<f64>, losses: Vec<f64>) -> Result<(Self, LossTable)> {
        if losses.len() != atoms.len() {
            return Err(FdrError::LengthMismatch { expected: atoms.len(), got: losses.len() });
        }
        let keep = validate_weights(&weights, atoms.len())?;
        let mut kept_atoms = Vec::new();
        let mut kept_weights = Vec::new();
        let mut kept_losses = Vec::new();
        for (i, ((a, w), l)) in atoms.into_iter().zip(weights).zip(losses).enumerate() {
            if keep[i] {
                kept_atoms.push(a);
                kept_weights.push(w);
                kept_losses.push(l);
            }
        }
        let support = Self::from_parts(kept_atoms, kept_weights, SupportKind::Finite);
        let table = LossTable::new(kept_losses)?;
        Ok((support, table))
    }

    /// `n` equally weighted atoms named `0..n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(FdrError::InvalidWeights("support needs at least one atom".into()));
        }
        let atoms = (0..n).map(|i| Atom::named(i.to_string())).collect();
        Self::finite(atoms, vec![1.0 / n as f64; n])
    }

    /// Gaussian reference `N(mean, sd²)` on the real line, reduced to
    /// Gauss-Hermite atoms.
    pub fn gaussian(mean: f64, sd: f64, nodes: usize) -> Result<Self> {
        let (x, w) = quadrature::gauss_hermite(nodes, mean, sd)?;
        Ok(Self::from_nodes(x, w, QuadratureRule::GaussHermite, nodes))
    }

    /// Uniform reference on `[a, b]`, reduced to Gauss-Legendre atoms.
    pub fn interval(a: f64, b: f64, nodes: usize) -> Result<Self> {
        let (x, w) = quadrature::gauss_legendre(nodes, a, b)?;
        Ok(Self::from_nodes(x, w, QuadratureRule::GaussLegendre, nodes))
    }

    fn from_nodes(x: Vec<f64>, w: Vec<f64>, rule: QuadratureRule, nodes: usize) -> Self {
        let (atoms, weights): (Vec<_>, Vec<_>) = x
            .into_iter()
            .zip(w)
            .enumerate()
            .filter(|(_, (_, w))| *w >= PRUNE_THRESHOLD)
            .map(|(i, (x, w))| (Atom::new(format!("q{i}"), vec![x]), w))
            .unzip();
        Self::from_parts(atoms, weights, SupportKind::Quadrature { rule, nodes })
    }

    fn from_parts(atoms: Vec<Atom>, mut weights: Vec<f64>, kind: SupportKind) -> Self {
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Self { atoms, weights, kind }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> SupportKind {
        self.kind
    }

    pub fn position(&self, atom_id: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a.id == atom_id)
    }

    fn check_aligned(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(FdrError::LengthMismatch { expected: self.len(), got: len });
        }
        Ok(())
    }

    /// `Σᵢ wᵢ·valuesᵢ`.
    pub fn expectation(&self, values: &[f64]) -> Result<f64> {
        self.check_aligned(values.len())?;
        Ok(self.weights.iter().zip(values).map(|(w, v)| w * v).sum())
    }

    /// `(δ*, sup L)`: smallest and largest loss over the support.
    pub fn essential_extremes(&self, loss: &LossTable) -> Result<(f64, f64)> {
        self.check_aligned(loss.len())?;
        let min = loss.values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = loss.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((min, max))
    }

    /// `Q({θ : L(θ) ≤ δ})`.
    pub fn rashomon_mass(&self, loss: &LossTable, delta: f64) -> Result<f64> {
        self.check_aligned(loss.len())?;
        Ok(self
            .weights
            .iter()
            .zip(&loss.values)
            .filter(|(_, &l)| l <= delta)
            .map(|(w, _)| w)
            .sum())
    }

    /// True iff two atoms carry distinct losses.
    pub fn is_separable(&self, loss: &LossTable) -> Result<bool> {
        let (lo, hi) = self.essential_extremes(loss)?;
        Ok(lo < hi)
    }
}

/// Returns a mask of the atoms to keep.
fn validate_weights(weights: &[f64], n_atoms: usize) -> Result<Vec<bool>> {
    if weights.len() != n_atoms {
        return Err(FdrError::LengthMismatch { expected: n_atoms, got: weights.len() });
    }
    if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
        return Err(FdrError::InvalidWeights(format!("weight {w} at position {i}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(FdrError::InvalidWeights(format!("weights sum to {total}, expected 1")));
    }
    let keep: Vec<bool> = weights.iter().map(|&w| w >= PRUNE_THRESHOLD).collect();
    if !keep.contains(&true) {
        return Err(FdrError::InvalidWeights("no atom with positive weight".into()));
    }
    Ok(keep)
}

/// Empirical risk `L_z(θ)` for each atom of a support.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTable {
    pub values: Vec<f64>,
    pub dataset_id: Option<String>,
}

impl LossTable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(FdrError::InvalidLoss { index, value });
        }
        Ok(Self { values, dataset_id: None })
    }

    pub fn for_dataset(values: Vec<f64>, dataset_id: impl Into<String>) -> Result<Self> {
        let mut t = Self::new(values)?;
        t.dataset_id = Some(dataset_id.into());
        Ok(t)
    }

    /// Tabulates `loss(coords)` over the atoms of `support`.
    pub fn from_fn(support: &ModelSupport, loss: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::new(support.atoms().iter().map(|a| loss(&a.coords)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
