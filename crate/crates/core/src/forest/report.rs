use serde::Serialize;

use super::Forest;
use crate::error::{Error, Result};
use crate::features::Dataset;
use crate::par::{self, Execution};

/// Squared-error view of the ensemble with one-hot labels.
///
/// With `h_n(x)` and `f(x)` one-hot, the error `e_n(x) = h_n(x) - f(x)` has
/// squared norm 2 when tree `n` is wrong and 0 otherwise. The ensemble
/// output `H(x)` is the vector of vote fractions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleErrorReport {
    /// `E[|e_n|^2]` per tree.
    pub tree_errors: Vec<f64>,
    /// Mean of `tree_errors`.
    pub mean_error: f64,
    /// `E[|H - f|^2]`.
    pub ensemble_error: f64,
    /// `E[e_n . e_m]`, row-major `N x N`.
    pub correlation: Vec<f64>,
    /// `ensemble_error <= mean_error` (to 1e-12).
    pub jensen_holds: bool,
    /// `ensemble_error >= mean_error / N` (to 1e-12).
    pub lower_bound_holds: bool,
}

impl EnsembleErrorReport {
    pub fn n_trees(&self) -> usize {
        self.tree_errors.len()
    }

    pub fn correlation_at(&self, n: usize, m: usize) -> f64 {
        self.correlation[n * self.n_trees() + m]
    }
}

pub fn ensemble_error_report(forest: &Forest, eval: &Dataset, exec: Execution) -> Result<EnsembleErrorReport> {
    if eval.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let n_trees = forest.trees.len();
    // Labels outside the vocabulary get their own one-hot slot.
    let truth: Vec<usize> = eval
        .labels
        .iter()
        .map(|l| forest.label_vocab.iter().position(|c| c == l).unwrap_or(forest.n_classes()))
        .collect();
    let preds: Vec<Vec<usize>> = par::try_map_range(exec, eval.len(), |i| forest.tree_predictions(eval.row(i)))?;
    let n = eval.len() as f64;

    let mut wrong = vec![0usize; n_trees];
    let mut ensemble_sum = 0.0;
    let mut frac = vec![0.0; forest.n_classes() + 1];
    for (p, &f) in preds.iter().zip(&truth) {
        frac.iter_mut().for_each(|v| *v = 0.0);
        for (t, &c) in p.iter().enumerate() {
            frac[c] += 1.0 / n_trees as f64;
            wrong[t] += (c != f) as usize;
        }
        frac[f] -= 1.0;
        ensemble_sum += frac.iter().map(|v| v * v).sum::<f64>();
    }
    let tree_errors: Vec<f64> = wrong.iter().map(|&w| 2.0 * w as f64 / n).collect();
    let mean_error = tree_errors.iter().sum::<f64>() / n_trees as f64;
    let ensemble_error = ensemble_sum / n;

    // e_n . e_m = [h_n = h_m] - [h_n = f] - [h_m = f] + 1.
    let correlation: Vec<f64> = par::map_range(exec, n_trees, |a| {
        (0..n_trees)
            .map(|b| {
                let agree = preds.iter().filter(|p| p[a] == p[b]).count() as f64;
                let (ca, cb) = ((n - wrong[a] as f64), (n - wrong[b] as f64));
                (agree - ca - cb + n) / n
            })
            .collect::<Vec<f64>>()
    })
    .into_iter()
    .flatten()
    .collect();

    Ok(EnsembleErrorReport {
        jensen_holds: ensemble_error <= mean_error + 1e-12,
        lower_bound_holds: ensemble_error >= mean_error / n_trees as f64 - 1e-12,
        tree_errors,
        mean_error,
        ensemble_error,
        correlation,
    })
}
