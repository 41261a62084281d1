use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::code::FaultCode;
use crate::error::{Error, Result};
use crate::features::FeatureSetKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassAccuracy {
    pub correct: usize,
    pub total: usize,
}

impl ClassAccuracy {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Test-split scores: per-class accuracy and the confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub n_samples: usize,
    pub per_class: BTreeMap<FaultCode, ClassAccuracy>,
    /// Classes in row/column order of `confusion`: every true label and
    /// every predicted label.
    pub classes: Vec<FaultCode>,
    /// `confusion[t][p]` counts samples of true class `t` predicted as `p`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate(truth: &[FaultCode], predicted: &[FaultCode]) -> Result<EvalReport> {
    if truth.len() != predicted.len() {
        return Err(Error::Data(format!("{} labels but {} predictions", truth.len(), predicted.len())));
    }
    if truth.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let classes: Vec<FaultCode> = truth.iter().chain(predicted).copied().collect::<BTreeSet<_>>().into_iter().collect();
    let idx = |c: &FaultCode| classes.binary_search(c).unwrap();
    let mut confusion = vec![vec![0usize; classes.len()]; classes.len()];
    let mut per_class: BTreeMap<FaultCode, ClassAccuracy> = BTreeMap::new();
    for (t, p) in truth.iter().zip(predicted) {
        confusion[idx(t)][idx(p)] += 1;
        let e = per_class.entry(*t).or_insert(ClassAccuracy { correct: 0, total: 0 });
        e.total += 1;
        e.correct += (t == p) as usize;
    }
    let correct: usize = per_class.values().map(|c| c.correct).sum();
    Ok(EvalReport {
        accuracy: correct as f64 / truth.len() as f64,
        n_samples: truth.len(),
        per_class,
        classes,
        confusion,
    })
}

impl EvalReport {
    /// Per-class table as CSV: `class,name,correct,total,accuracy`.
    pub fn per_class_csv(&self) -> String {
        let mut out = String::from("class,name,correct,total,accuracy\n");
        for (c, a) in &self.per_class {
            out.push_str(&format!("{c},{},{},{},{}\n", c.name(), a.correct, a.total, a.accuracy()));
        }
        out
    }

    /// Confusion matrix as CSV with true classes down and predictions across.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for c in &self.classes {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
        for (c, row) in self.classes.iter().zip(&self.confusion) {
            out.push_str(&c.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Test accuracy of one feature set at one tree count and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub feature_set: FeatureSetKind,
    pub n_trees: usize,
    pub seed: u64,
    pub accuracy: f64,
}

pub const SWEEP_HEADER: &str = "feature_set,n_trees,seed,accuracy";

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for p in points {
        out.push_str(&format!("{},{},{},{}\n", p.feature_set, p.n_trees, p.seed, p.accuracy));
    }
    out
}

/// Seed-averaged accuracy per feature set and tree count.
pub fn sweep_means(points: &[SweepPoint]) -> BTreeMap<(FeatureSetKind, usize), f64> {
    let mut acc: BTreeMap<(FeatureSetKind, usize), (f64, usize)> = BTreeMap::new();
    for p in points {
        let e = acc.entry((p.feature_set, p.n_trees)).or_insert((0.0, 0));
        e.0 += p.accuracy;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (sum, n))| (k, sum / n as f64)).collect()
}

/// Per feature set, the tree count with the best mean accuracy. Ties go to
/// the smaller forest.
pub fn best_counts(points: &[SweepPoint]) -> Vec<(FeatureSetKind, usize, f64)> {
    let mut best: BTreeMap<FeatureSetKind, (usize, f64)> = BTreeMap::new();
    for ((kind, n), mean) in sweep_means(points) {
        let e = best.entry(kind).or_insert((n, mean));
        if mean > e.1 || (mean == e.1 && n < e.0) {
            *e = (n, mean);
        }
    }
    best.into_iter().map(|(k, (n, a))| (k, n, a)).collect()
}
