//! Deterministic fixtures for the benchmarks.

use fdr_core::{Atom, LossTable, ModelSupport, TabulatedLaw};

/// Reference weights and losses on `m` atoms from a fixed pattern.
pub fn instance(m: usize) -> (ModelSupport, LossTable) {
    let raw: Vec<f64> = (0..m).map(|i| 1.0 + 0.5 * (i as f64 * 0.7).sin()).collect();
    let total: f64 = raw.iter().sum();
    let atoms = (0..m).map(|i| Atom::named(format!("m{i}"))).collect();
    let support = ModelSupport::finite(atoms, raw.iter().map(|w| w / total).collect()).expect("valid weights");
    let loss = LossTable::new((0..m).map(|i| 2.0 + 2.0 * (i as f64 * 1.3).cos()).collect()).expect("finite losses");
    (support, loss)
}

/// `d` datasets with shifted loss patterns over `m` atoms.
pub fn world(m: usize, d: usize) -> (ModelSupport, TabulatedLaw) {
    let (support, _) = instance(m);
    let tables = (0..d)
        .map(|z| {
            LossTable::new((0..m).map(|i| 1.5 + (i as f64 * 0.9 + z as f64 * 2.1).sin()).collect())
                .expect("finite losses")
        })
        .collect();
    let probs = vec![1.0 / d as f64; d];
    let law = TabulatedLaw::new((0..d).map(|z| format!("z{z}")).collect(), probs, tables).expect("valid law");
    (support, law)
}
