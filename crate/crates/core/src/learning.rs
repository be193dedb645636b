//! Datasets, losses, finite data-generating laws and extensional algorithms.

use std::fmt;
use std::sync::Arc;

use crate::error::{FdrError, Result};
use crate::model_space::{Atom, LossTable, ModelSupport, MASS_TOLERANCE};

/// Hard cap on the number of datasets an i.i.d. product law may enumerate.
pub const MAX_ENUMERATED_DATASETS: usize = 1_000_000;

/// Allowed deviation of a law's total probability from one.
pub const LAW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub id: String,
    pub patterns: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl LabeledDataset {
    pub fn new(id: impl Into<String>, patterns: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if patterns.is_empty() {
            return Err(FdrError::InvalidInput("dataset needs at least one pair".into()));
        }
        if patterns.len() != labels.len() {
            return Err(FdrError::LengthMismatch { expected: patterns.len(), got: labels.len() });
        }
        let finite = patterns.iter().flatten().chain(&labels).all(|v| v.is_finite());
        if !finite {
            return Err(FdrError::InvalidInput("dataset entries must be finite".into()));
        }
        Ok(Self { id: id.into(), patterns, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// User-supplied `h(θ, x)`.
pub type PredictFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// The map `h(θ, x)` from model coordinates and a pattern to a label.
#[derive(Clone)]
pub enum Predictor {
    /// `θ·x`
    Linear,
    /// `1` if `x₀ ≥ θ₀`, else `0`.
    Threshold,
    Custom(PredictFn),
}

impl Predictor {
    pub fn predict(&self, model: &[f64], pattern: &[f64]) -> f64 {
        match self {
            Predictor::Linear => model.iter().zip(pattern).map(|(a, b)| a * b).sum(),
            Predictor::Threshold => {
                if pattern.first().copied().unwrap_or(f64::NAN) >= model.first().copied().unwrap_or(f64::NAN) {
                    1.0
                } else {
                    0.0
                }
            }
            Predictor::Custom(h) => h(model, pattern),
        }
    }
}

impl fmt::Debug for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predictor::Linear => f.write_str("Linear"),
            Predictor::Threshold => f.write_str("Threshold"),
            Predictor::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Per-pair loss `ℓ(predicted, true)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairLoss {
    ZeroOne,
    Squared,
    Absolute,
}

impl PairLoss {
    pub fn eval(self, predicted: f64, truth: f64) -> f64 {
        match self {
            PairLoss::ZeroOne => {
                if predicted == truth {
                    0.0
                } else {
                    1.0
                }
            }
            PairLoss::Squared => (predicted - truth) * (predicted - truth),
            PairLoss::Absolute => (predicted - truth).abs(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LossSpec {
    pub predictor: Predictor,
    pub loss: PairLoss,
}

impl LossSpec {
    pub fn new(predictor: Predictor, loss: PairLoss) -> Self {
        Self { predictor, loss }
    }
}

/// `(1/n)·Σᵢ ℓ(h(θ, xᵢ), yᵢ)`.
pub fn empirical_risk(model: &Atom, dataset: &LabeledDataset, spec: &LossSpec) -> Result<f64> {
    let mut total = 0.0;
    for (x, &y) in dataset.patterns.iter().zip(&dataset.labels) {
        let predicted = spec.predictor.predict(&model.coords, x);
        if !predicted.is_finite() {
            return Err(FdrError::InvalidInput(format!(
                "model `{}` produced a non-finite prediction",
                model.id
            )));
        }
        total += spec.loss.eval(predicted, y);
    }
    Ok(total / dataset.len() as f64)
}

pub fn loss_table(support: &ModelSupport, dataset: &LabeledDataset, spec: &LossSpec) -> Result<LossTable> {
    let values = support
        .atoms()
        .iter()
        .map(|a| empirical_risk(a, dataset, spec))
        .collect::<Result<Vec<_>>>()?;
    LossTable::for_dataset(values, dataset.id.clone())
}

fn validate_probabilities(probabilities: &[f64]) -> Result<()> {
    if probabilities.is_empty() {
        return Err(FdrError::InvalidInput("law needs at least one dataset".into()));
    }
    if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(FdrError::InvalidWeights("probabilities must be finite and nonnegative".into()));
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > LAW_TOLERANCE {
        return Err(FdrError::InvalidWeights(format!("probabilities sum to {total}, expected 1")));
    }
    Ok(())
}

/// A finite law over datasets of a common size.
#[derive(Debug, Clone, PartialEq)]
pub struct DataGeneratingLaw {
    datasets: Vec<LabeledDataset>,
    probabilities: Vec<f64>,
}

impl DataGeneratingLaw {
    pub fn new(datasets: Vec<LabeledDataset>, probabilities: Vec<f64>) -> Result<Self> {
        if datasets.len() != probabilities.len() {
            return Err(FdrError::LengthMismatch { expected: datasets.len(), got: probabilities.len() });
        }
        validate_probabilities(&probabilities)?;
        let n = datasets[0].len();
        if datasets.iter().any(|d| d.len() != n) {
            return Err(FdrError::InvalidInput("all datasets must have the same size".into()));
        }
        Ok(Self { datasets, probabilities })
    }

    /// Product law of `n` i.i.d. draws from a finite law over labeled pairs.
    /// Datasets are enumerated in lexicographic order of pair indices.
    pub fn iid_product(pairs: &[(Vec<f64>, f64)], pair_probabilities: &[f64], n: usize) -> Result<Self> {
        if pairs.len() != pair_probabilities.len() {
            return Err(FdrError::LengthMismatch { expected: pairs.len(), got: pair_probabilities.len() });
        }
        validate_probabilities(pair_probabilities)?;
        if n == 0 {
            return Err(FdrError::InvalidInput("dataset size must be at least 1".into()));
        }
        let k = pairs.len();
        let count = (k as f64).powi(n as i32);
        if count > MAX_ENUMERATED_DATASETS as f64 {
            return Err(FdrError::InvalidInput(format!(
                "product law would enumerate {count} datasets (cap {MAX_ENUMERATED_DATASETS})"
            )));
        }
        let count = count as usize;
        let mut datasets = Vec::with_capacity(count);
        let mut probabilities = Vec::with_capacity(count);
        let mut idx = vec![0usize; n];
        for c in 0..count {
            let mut prob = 1.0;
            let mut patterns = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for &i in &idx {
                prob *= pair_probabilities[i];
                patterns.push(pairs[i].0.clone());
                labels.push(pairs[i].1);
            }
            datasets.push(LabeledDataset::new(format!("z{c}"), patterns, labels)?);
            probabilities.push(prob);
            // odometer increment, last position fastest
            for pos in (0..n).rev() {
                idx[pos] += 1;
                if idx[pos] < k {
                    break;
                }
                idx[pos] = 0;
            }
        }
        // products of validated pair probabilities; the summation error of
        // up to 10⁶ terms can exceed the law tolerance, so skip that check
        Ok(Self { datasets, probabilities })
    }

    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }

    /// Each dataset with its probability, exactly once, in construction order.
    pub fn enumerate(&self) -> impl Iterator<Item = (&LabeledDataset, f64)> + '_ {
        self.datasets.iter().zip(self.probabilities.iter().copied())
    }

    /// Loss tables of every dataset over `support`.
    pub fn tabulate(&self, support: &ModelSupport, spec: &LossSpec) -> Result<TabulatedLaw> {
        let tables = self
            .datasets
            .iter()
            .map(|d| loss_table(support, d, spec))
            .collect::<Result<Vec<_>>>()?;
        TabulatedLaw::new(
            self.datasets.iter().map(|d| d.id.clone()).collect(),
            self.probabilities.clone(),
            tables,
        )
    }
}

/// A finite law over datasets where each dataset is represented only by its
/// loss table on a fixed support.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedLaw {
    ids: Vec<String>,
    probabilities: Vec<f64>,
    tables: Vec<LossTable>,
}

impl TabulatedLaw {
    pub fn new(ids: Vec<String>, probabilities: Vec<f64>, tables: Vec<LossTable>) -> Result<Self> {
        if ids.len() != probabilities.len() {
            return Err(FdrError::LengthMismatch { expected: ids.len(), got: probabilities.len() });
        }
        if ids.len() != tables.len() {
            return Err(FdrError::LengthMismatch { expected: ids.len(), got: tables.len() });
        }
        validate_probabilities(&probabilities)?;
        let m = tables[0].len();
        if let Some(t) = tables.iter().find(|t| t.len() != m) {
            return Err(FdrError::LengthMismatch { expected: m, got: t.len() });
        }
        Ok(Self { ids, probabilities, tables })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn tables(&self) -> &[LossTable] {
        &self.tables
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|i| i == id)
    }

    pub fn atoms(&self) -> usize {
        self.tables[0].len()
    }
}

/// An algorithm given extensionally: one distribution over support atoms per
/// dataset, aligned with a [`TabulatedLaw`].
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticAlgorithm {
    conditionals: Vec<Vec<f64>>,
}

impl StochasticAlgorithm {
    pub fn new(conditionals: Vec<Vec<f64>>) -> Result<Self> {
        if conditionals.is_empty() {
            return Err(FdrError::InvalidInput("algorithm needs at least one conditional".into()));
        }
        let m = conditionals[0].len();
        for (z, row) in conditionals.iter().enumerate() {
            if row.len() != m {
                return Err(FdrError::LengthMismatch { expected: m, got: row.len() });
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(FdrError::InvalidWeights(format!("conditional {z} has a negative or non-finite mass")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > MASS_TOLERANCE {
                return Err(FdrError::InvalidWeights(format!("conditional {z} sums to {total}")));
            }
        }
        Ok(Self { conditionals })
    }

    /// The same distribution for each of `datasets` datasets.
    pub fn data_independent(distribution: Vec<f64>, datasets: usize) -> Result<Self> {
        Self::new(vec![distribution; datasets])
    }

    pub fn conditional(&self, z: usize) -> &[f64] {
        &self.conditionals[z]
    }

    pub fn conditionals(&self) -> &[Vec<f64>] {
        &self.conditionals
    }

    pub fn len(&self) -> usize {
        self.conditionals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditionals.is_empty()
    }

    pub fn is_data_independent(&self) -> bool {
        self.conditionals.iter().all(|c| c == &self.conditionals[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(id: &str, xs: &[f64], ys: &[f64]) -> LabeledDataset {
        LabeledDataset::new(id, xs.iter().map(|&x| vec![x]).collect(), ys.to_vec()).unwrap()
    }

    #[test]
    fn empirical_risk_examples() {
        let spec = LossSpec::new(Predictor::Threshold, PairLoss::ZeroOne);
        let d = ds("z", &[0.1, 0.4, 0.6, 0.9], &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(empirical_risk(&Atom::new("t", vec![0.5]), &d, &spec).unwrap(), 0.0);
        assert_eq!(empirical_risk(&Atom::new("t", vec![0.3]), &d, &spec).unwrap(), 0.25);

        let sq = LossSpec::new(
            Predictor::Custom(Arc::new(|_, x: &[f64]| x[0])),
            PairLoss::Squared,
        );
        let d2 = ds("z", &[0.0, 2.0], &[1.0, 1.0]);
        assert_eq!(empirical_risk(&Atom::named("id"), &d2, &sq).unwrap(), 1.0);

        let bad = LossSpec::new(Predictor::Custom(Arc::new(|_, _| f64::NAN)), PairLoss::Absolute);
        assert!(empirical_risk(&Atom::named("nan"), &d2, &bad).is_err());
    }

    #[test]
    fn threshold_tables_match_per_pair_tally() {
        let atoms = vec![
            Atom::new("a", vec![0.2]),
            Atom::new("b", vec![0.5]),
            Atom::new("c", vec![0.8]),
        ];
        let support = ModelSupport::finite(atoms, vec![0.2, 0.5, 0.3]).unwrap();
        let xs = [0.1, 0.4, 0.6, 0.9];
        let ys = [0.0, 1.0, 1.0, 0.0];
        let d = ds("z", &xs, &ys);
        let t = loss_table(&support, &d, &LossSpec::new(Predictor::Threshold, PairLoss::ZeroOne)).unwrap();
        // independent tally
        let expect: Vec<f64> = [0.2, 0.5, 0.8]
            .iter()
            .map(|&th| {
                xs.iter()
                    .zip(&ys)
                    .filter(|(&x, &y)| (if x >= th { 1.0 } else { 0.0 }) != y)
                    .count() as f64
                    / 4.0
            })
            .collect();
        assert_eq!(t.values, expect);
        assert_eq!(t.dataset_id.as_deref(), Some("z"));
        // zero-one tables live on the grid {0, 1/n, ..., 1}
        assert!(t.values.iter().all(|v| (v * 4.0).fract() == 0.0));
    }

    #[test]
    fn loss_table_edge_cases() {
        let one = ModelSupport::finite(vec![Atom::new("a", vec![1.0])], vec![1.0]).unwrap();
        let d = ds("z", &[1.0, 2.0], &[1.0, 1.0]);
        let spec = LossSpec::new(Predictor::Linear, PairLoss::Absolute);
        assert_eq!(loss_table(&one, &d, &spec).unwrap().len(), 1);

        let twins = ModelSupport::finite(
            vec![Atom::new("a", vec![1.0]), Atom::new("b", vec![1.0])],
            vec![0.5, 0.5],
        )
        .unwrap();
        let t = loss_table(&twins, &d, &spec).unwrap();
        assert_eq!(t.values[0], t.values[1]);
        assert!(!twins.is_separable(&t).unwrap());
    }

    #[test]
    fn reordering_pairs_preserves_table() {
        let support = ModelSupport::finite(
            vec![Atom::new("a", vec![0.3]), Atom::new("b", vec![-1.2])],
            vec![0.5, 0.5],
        )
        .unwrap();
        let spec = LossSpec::new(Predictor::Linear, PairLoss::Squared);
        let d1 = ds("z", &[1.0, 2.0, -3.0], &[0.5, 0.0, 1.0]);
        let d2 = ds("z", &[-3.0, 1.0, 2.0], &[1.0, 0.5, 0.0]);
        let (t1, t2) = (loss_table(&support, &d1, &spec).unwrap(), loss_table(&support, &d2, &spec).unwrap());
        for (a, b) in t1.values.iter().zip(&t2.values) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn enumerate_law() {
        let law = DataGeneratingLaw::new(
            vec![ds("a", &[0.0], &[0.0]), ds("b", &[1.0], &[1.0])],
            vec![0.25, 0.75],
        )
        .unwrap();
        let got: Vec<(String, f64)> = law.enumerate().map(|(d, p)| (d.id.clone(), p)).collect();
        assert_eq!(got, vec![("a".to_string(), 0.25), ("b".to_string(), 0.75)]);

        let uniform = DataGeneratingLaw::new(
            vec![ds("a", &[0.0], &[0.0]), ds("b", &[1.0], &[1.0])],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert!(uniform.enumerate().all(|(_, p)| p == 0.5));
    }

    #[test]
    fn iid_product_law() {
        let pairs = vec![(vec![0.0], 0.0), (vec![1.0], 1.0)];
        let law = DataGeneratingLaw::iid_product(&pairs, &[0.5, 0.5], 2).unwrap();
        assert_eq!(law.len(), 4);
        assert!(law.enumerate().all(|(d, p)| p == 0.25 && d.len() == 2));
        let firsts: Vec<Vec<f64>> = law.enumerate().map(|(d, _)| d.labels.clone()).collect();
        assert_eq!(firsts, vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]);

        assert!(DataGeneratingLaw::iid_product(&pairs, &[0.5, 0.5], 21).is_err());
        assert!(DataGeneratingLaw::iid_product(&pairs, &[0.5, 0.4], 2).is_err());
    }

    #[test]
    fn law_validation() {
        let a = ds("a", &[0.0], &[0.0]);
        let b = ds("b", &[0.0, 1.0], &[0.0, 1.0]);
        assert!(DataGeneratingLaw::new(vec![a.clone(), b], vec![0.5, 0.5]).is_err());
        assert!(DataGeneratingLaw::new(vec![a.clone()], vec![0.9]).is_err());
        assert!(LabeledDataset::new("e", vec![], vec![]).is_err());
        assert!(LabeledDataset::new("e", vec![vec![f64::INFINITY]], vec![0.0]).is_err());
    }

    #[test]
    fn algorithm_validation() {
        assert!(StochasticAlgorithm::new(vec![vec![0.5, 0.6]]).is_err());
        assert!(StochasticAlgorithm::new(vec![vec![1.5, -0.5]]).is_err());
        assert!(StochasticAlgorithm::new(vec![vec![0.5, 0.5], vec![1.0]]).is_err());
        let alg = StochasticAlgorithm::data_independent(vec![0.3, 0.7], 3).unwrap();
        assert!(alg.is_data_independent());
        assert_eq!(alg.len(), 3);
    }
}
