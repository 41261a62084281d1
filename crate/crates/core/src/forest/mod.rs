//! Random forest of CART trees with Gini splits, bootstrap bagging and
//! per-node feature subsampling.

mod eval;
mod report;
mod split;
mod tree;

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use eval::{best_counts, evaluate, sweep_csv, sweep_means, ClassAccuracy, EvalReport, SweepPoint, SWEEP_HEADER};
pub use report::{ensemble_error_report, EnsembleErrorReport};
pub use split::{best_split, gini, Samples, Split, SplitScratch, SPLIT_EPSILON};
pub use tree::{grow_tree, GrowParams, Tree, TreeNode};
pub(crate) use tree::majority as majority_index;

use crate::code::FaultCode;
use crate::error::{Error, Result};
use crate::features::{Dataset, FeatureSetKind, NormalizationMode};
use crate::par::{self, Execution};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_trees: usize,
    /// `None` grows until the other stopping rules apply.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features searched per split; `None` means `ceil(sqrt(K))`.
    pub mtry: Option<usize>,
    /// Bootstrap size as a fraction of the training set, drawn with
    /// replacement.
    pub bootstrap_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { n_trees: 100, max_depth: None, min_samples_leaf: 1, mtry: None, bootstrap_fraction: 1.0, seed: 0 }
    }
}

impl TrainConfig {
    pub fn resolved_mtry(&self, n_features: usize) -> usize {
        self.mtry.unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.n_trees == 0 {
            return bad("n_trees must be at least 1".into());
        }
        let mtry = self.resolved_mtry(n_features);
        if mtry == 0 || mtry > n_features {
            return bad(format!("mtry {mtry} outside [1, {n_features}]"));
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be at least 1".into());
        }
        if !(self.bootstrap_fraction.is_finite() && self.bootstrap_fraction > 0.0) {
            return bad(format!("bootstrap_fraction {} must be positive", self.bootstrap_fraction));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: FaultCode,
    /// Votes for every code in the training vocabulary.
    pub votes: BTreeMap<FaultCode, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OobReport {
    pub accuracy: f64,
    pub evaluated: usize,
    /// Samples that were in every tree's bootstrap.
    pub skipped: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Forest {
    pub version: u32,
    pub feature_set_kind: Option<FeatureSetKind>,
    pub normalization: Option<NormalizationMode>,
    pub n_features: usize,
    pub n_trees: usize,
    pub label_vocab: Vec<FaultCode>,
    pub config: TrainConfig,
    pub n_train_samples: usize,
    pub trees: Vec<Tree>,
    /// Bootstrap rows per tree. Not stored in the model file; they are
    /// redrawn from the seed on load.
    #[serde(skip)]
    bootstraps: Vec<Vec<u32>>,
}

impl PartialEq for Forest {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version
            && self.feature_set_kind == other.feature_set_kind
            && self.normalization == other.normalization
            && self.n_features == other.n_features
            && self.label_vocab == other.label_vocab
            && self.config == other.config
            && self.n_train_samples == other.n_train_samples
            && self.trees == other.trees
    }
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

fn draw_bootstrap<R: Rng>(rng: &mut R, n: usize, fraction: f64) -> Vec<u32> {
    let m = ((n as f64 * fraction).round() as usize).max(1);
    (0..m).map(|_| rng.gen_range(0..n as u32)).collect()
}

pub fn train_forest(ds: &Dataset, config: &TrainConfig) -> Result<Forest> {
    train_forest_with(ds, config, Execution::default())
}

/// Trains a forest. Each tree draws its bootstrap and feature subsets from
/// its own stream of the seeded generator, so the result does not depend on
/// `exec` or on the order trees are built.
pub fn train_forest_with(ds: &Dataset, config: &TrainConfig, exec: Execution) -> Result<Forest> {
    config.validate(ds.n_features)?;
    if ds.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let vocab: Vec<FaultCode> = ds.class_counts().into_keys().collect();
    if vocab.len() < 2 {
        return Err(Error::SingleClass(format!("only class {} present", vocab[0])));
    }
    let index: BTreeMap<FaultCode, u16> = vocab.iter().enumerate().map(|(k, &c)| (c, k as u16)).collect();
    let targets: Vec<u16> = ds.labels.iter().map(|l| index[l]).collect();
    let data = Samples { features: &ds.features, n_features: ds.n_features, targets: &targets, n_classes: vocab.len() };
    let params = GrowParams {
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
        mtry: config.resolved_mtry(ds.n_features),
    };
    let grown = par::map_range(exec, config.n_trees, |t| {
        let mut rng = tree_rng(config.seed, t);
        let boot = draw_bootstrap(&mut rng, ds.len(), config.bootstrap_fraction);
        let rows = boot.iter().map(|&i| i as usize).collect();
        (grow_tree(&data, rows, &params, &mut rng), boot)
    });
    let (trees, bootstraps) = grown.into_iter().unzip();
    Ok(Forest {
        version: MODEL_VERSION,
        feature_set_kind: ds.kind,
        normalization: ds.normalization,
        n_features: ds.n_features,
        n_trees: config.n_trees,
        label_vocab: vocab,
        config: *config,
        n_train_samples: ds.len(),
        trees,
        bootstraps,
    })
}

impl Forest {
    pub fn n_classes(&self) -> usize {
        self.label_vocab.len()
    }

    pub fn bootstrap(&self, tree: usize) -> &[u32] {
        &self.bootstraps[tree]
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::FeatureLength { expected: self.n_features, got: x.len() });
        }
        Ok(())
    }

    /// Adds one vote per tree into `votes` (indexed like `label_vocab`).
    pub fn vote_into(&self, x: &[f64], votes: &mut [u32]) -> Result<()> {
        self.check_len(x)?;
        votes.iter_mut().for_each(|v| *v = 0);
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        Ok(())
    }

    /// Class index predicted by each tree.
    pub fn tree_predictions(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.check_len(x)?;
        Ok(self.trees.iter().map(|t| t.predict(x)).collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let mut votes = vec![0u32; self.n_classes()];
        self.vote_into(x, &mut votes)?;
        let label = self.label_vocab[tree::majority(&votes)];
        let votes = self.label_vocab.iter().zip(&votes).map(|(&c, &v)| (c, v as usize)).collect();
        Ok(Prediction { label, votes })
    }

    /// Majority label only; ties go to the numerically lowest code.
    pub fn predict_label(&self, x: &[f64]) -> Result<FaultCode> {
        let mut votes = vec![0u32; self.n_classes()];
        self.vote_into(x, &mut votes)?;
        Ok(self.label_vocab[tree::majority(&votes)])
    }

    pub fn predict_dataset(&self, ds: &Dataset, exec: Execution) -> Result<Vec<FaultCode>> {
        if ds.n_features != self.n_features {
            return Err(Error::FeatureLength { expected: self.n_features, got: ds.n_features });
        }
        par::try_map_range(exec, ds.len(), |i| self.predict_label(ds.row(i)))
    }

    /// Per-sample count of trees whose bootstrap left the sample out.
    pub fn oob_tree_counts(&self) -> Vec<usize> {
        let mut counts = vec![self.n_trees; self.n_train_samples];
        for b in &self.bootstraps {
            let mut seen = vec![false; self.n_train_samples];
            for &i in b {
                seen[i as usize] = true;
            }
            seen.iter().zip(counts.iter_mut()).for_each(|(&s, c)| *c -= s as usize);
        }
        counts
    }

    /// Accuracy of each training sample's vote among the trees that did not
    /// see it. `ds` must be the training set.
    pub fn oob_accuracy(&self, ds: &Dataset) -> Result<OobReport> {
        if ds.len() != self.n_train_samples || ds.n_features != self.n_features {
            return Err(Error::Data(format!(
                "OOB needs the {}-sample training set, got {} samples",
                self.n_train_samples,
                ds.len()
            )));
        }
        let in_bag: Vec<Vec<bool>> = self
            .bootstraps
            .iter()
            .map(|b| {
                let mut m = vec![false; ds.len()];
                b.iter().for_each(|&i| m[i as usize] = true);
                m
            })
            .collect();
        let (mut correct, mut evaluated, mut skipped) = (0usize, 0usize, 0usize);
        let mut votes = vec![0u32; self.n_classes()];
        for i in 0..ds.len() {
            votes.iter_mut().for_each(|v| *v = 0);
            let mut any = false;
            for (t, tree) in self.trees.iter().enumerate() {
                if !in_bag[t][i] {
                    votes[tree.predict(ds.row(i))] += 1;
                    any = true;
                }
            }
            if !any {
                skipped += 1;
                continue;
            }
            evaluated += 1;
            correct += (self.label_vocab[tree::majority(&votes)] == ds.labels[i]) as usize;
        }
        let accuracy = if evaluated == 0 { 0.0 } else { correct as f64 / evaluated as f64 };
        Ok(OobReport { accuracy, evaluated, skipped })
    }

    /// The first `n` trees. A tree's randomness depends only on the seed and
    /// its index, so this is the forest `n_trees = n` would have grown.
    pub fn truncated(&self, n: usize) -> Result<Forest> {
        if n == 0 || n > self.n_trees {
            return Err(Error::InvalidParams(format!("cannot keep {n} of {} trees", self.n_trees)));
        }
        let mut f = self.clone();
        f.trees.truncate(n);
        f.bootstraps.truncate(n);
        f.n_trees = n;
        f.config.n_trees = n;
        Ok(f)
    }

    /// Accuracy on `ds` of the first `n` trees, for every `n` in `counts`.
    /// Each row is run through the trees once.
    pub fn accuracy_by_tree_count(&self, ds: &Dataset, counts: &[usize], exec: Execution) -> Result<Vec<f64>> {
        if let Some(&bad) = counts.iter().find(|&&n| n == 0 || n > self.n_trees) {
            return Err(Error::InvalidParams(format!("cannot keep {bad} of {} trees", self.n_trees)));
        }
        if ds.is_empty() {
            return Err(Error::Empty("evaluation set"));
        }
        let hits: Vec<Vec<bool>> = par::try_map_range(exec, ds.len(), |i| {
            let preds = self.tree_predictions(ds.row(i))?;
            let mut votes = vec![0u32; self.n_classes()];
            let mut done = 0;
            let mut row = Vec::with_capacity(counts.len());
            for &n in counts {
                // Counts may come in any order; restart when they go down.
                if n < done {
                    votes.iter_mut().for_each(|v| *v = 0);
                    done = 0;
                }
                for &c in &preds[done..n] {
                    votes[c] += 1;
                }
                done = n;
                row.push(self.label_vocab[tree::majority(&votes)] == ds.labels[i]);
            }
            Ok::<_, Error>(row)
        })?;
        Ok((0..counts.len())
            .map(|k| hits.iter().filter(|h| h[k]).count() as f64 / ds.len() as f64)
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest serializes")
    }

    pub fn from_json(text: &str) -> Result<Forest> {
        let mut f: Forest = serde_json::from_str(text)?;
        f.check_structure()?;
        f.bootstraps = (0..f.n_trees)
            .map(|t| draw_bootstrap(&mut tree_rng(f.config.seed, t), f.n_train_samples, f.config.bootstrap_fraction))
            .collect();
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Forest> {
        Forest::from_json(&std::fs::read_to_string(path)?)
    }

    fn check_structure(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Data(format!("invalid model: {m}")));
        if self.version != MODEL_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        if self.trees.len() != self.n_trees || self.n_trees == 0 {
            return bad(format!("{} trees listed, n_trees = {}", self.trees.len(), self.n_trees));
        }
        if self.n_train_samples == 0 || self.label_vocab.is_empty() {
            return bad("empty training record".into());
        }
        if let Some(k) = self.feature_set_kind {
            if k.len() != self.n_features {
                return bad(format!("{k} features need length {}, got {}", k.len(), self.n_features));
            }
        }
        for (t, tree) in self.trees.iter().enumerate() {
            let n = tree.nodes.len() as u32;
            for node in &tree.nodes {
                let ok = match node {
                    TreeNode::Split { feature, threshold, left, right } => {
                        *feature < self.n_features && threshold.is_finite() && *left < n && *right < n
                    }
                    TreeNode::Leaf { counts } => counts.len() == self.label_vocab.len(),
                };
                if !ok {
                    return bad(format!("malformed node in tree {t}"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn blobs(n_per: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let centers = [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)];
        let codes = [FaultCode::NORMAL, FaultCode::from_switches(&[1]), FaultCode::from_switches(&[2])];
        let mut ds = Dataset::new(2, None);
        for i in 0..n_per {
            for (c, &(cx, cy)) in centers.iter().enumerate() {
                let row = [cx + noise.sample(&mut rng), cy + noise.sample(&mut rng)];
                ds.push(&row, codes[c], 0.0, i as u32).unwrap();
            }
        }
        ds
    }

    fn small_config(n_trees: usize) -> TrainConfig {
        TrainConfig { n_trees, seed: 11, ..Default::default() }
    }

    #[test]
    fn blobs_holdout_accuracy() {
        let train = blobs(70, 1);
        let test = blobs(30, 2);
        let f = train_forest(&train, &small_config(50)).unwrap();
        let pred = f.predict_dataset(&test, Execution::Sequential).unwrap();
        let acc = pred.iter().zip(&test.labels).filter(|(a, b)| a == b).count() as f64 / test.len() as f64;
        assert!(acc >= 0.95, "accuracy {acc}");
        let oob = f.oob_accuracy(&train).unwrap();
        assert!((oob.accuracy - acc).abs() <= 0.05, "oob {} vs {acc}", oob.accuracy);
    }

    #[test]
    fn truncation_equals_smaller_training() {
        let train = blobs(20, 3);
        let test = blobs(15, 4);
        let big = train_forest(&train, &small_config(12)).unwrap();
        let small = train_forest(&train, &small_config(5)).unwrap();
        let cut = big.truncated(5).unwrap();
        assert_eq!(cut, small);
        assert_eq!(cut.to_json(), small.to_json());
        assert_eq!(cut.bootstrap(4), small.bootstrap(4));
        assert!(big.truncated(0).is_err() && big.truncated(13).is_err());

        let counts = [12, 1, 5, 5, 8];
        let by_count = big.accuracy_by_tree_count(&test, &counts, Execution::Parallel).unwrap();
        for (&n, &acc) in counts.iter().zip(&by_count) {
            let pred = big.truncated(n).unwrap().predict_dataset(&test, Execution::Sequential).unwrap();
            let direct = pred.iter().zip(&test.labels).filter(|(a, b)| a == b).count() as f64 / test.len() as f64;
            assert_eq!(acc, direct, "{n} trees");
        }
    }

    #[test]
    fn single_class_rejected() {
        let ds = Dataset::from_rows(&[vec![0.0], vec![1.0]], &[FaultCode::NORMAL; 2]).unwrap();
        assert!(matches!(train_forest(&ds, &small_config(3)), Err(Error::SingleClass(_))));
    }

    #[test]
    fn config_validation() {
        let ds = blobs(5, 0);
        for bad in [
            TrainConfig { n_trees: 0, ..Default::default() },
            TrainConfig { mtry: Some(3), ..Default::default() },
            TrainConfig { mtry: Some(0), ..Default::default() },
            TrainConfig { bootstrap_fraction: 0.0, ..Default::default() },
        ] {
            assert!(train_forest(&ds, &bad).is_err());
        }
    }

    #[test]
    fn execution_order_does_not_matter() {
        let ds = blobs(40, 3);
        let a = train_forest_with(&ds, &small_config(12), Execution::Sequential).unwrap();
        let b = train_forest_with(&ds, &small_config(12), Execution::Parallel).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.bootstraps, b.bootstraps);
    }

    #[test]
    fn single_tree_forest_matches_tree() {
        let ds = blobs(30, 4);
        let f = train_forest(&ds, &small_config(1)).unwrap();
        for i in 0..ds.len() {
            let x = ds.row(i);
            assert_eq!(f.predict_label(x).unwrap(), f.label_vocab[f.trees[0].predict(x)]);
        }
        // OOB set of a single tree is exactly the rows outside its bootstrap.
        let counts = f.oob_tree_counts();
        for (i, &c) in counts.iter().enumerate() {
            assert_eq!(c == 1, !f.bootstrap(0).contains(&(i as u32)));
        }
    }

    #[test]
    fn votes_conserve_and_match_recount() {
        let ds = blobs(30, 5);
        let f = train_forest(&ds, &small_config(25)).unwrap();
        for i in 0..ds.len() {
            let p = f.predict(ds.row(i)).unwrap();
            assert_eq!(p.votes.values().sum::<usize>(), 25);
            let mut recount: BTreeMap<FaultCode, usize> = BTreeMap::new();
            for t in &f.trees {
                *recount.entry(f.label_vocab[t.predict(ds.row(i))]).or_default() += 1;
            }
            let max = *recount.values().max().unwrap();
            let want = *recount.iter().find(|(_, &v)| v == max).unwrap().0;
            assert_eq!(p.label, want);
        }
    }

    #[test]
    fn vote_tie_prefers_lower_code() {
        let s1 = FaultCode::from_switches(&[1]);
        let s3 = FaultCode::from_switches(&[3]);
        let leaf = |k: usize| Tree { nodes: vec![TreeNode::Leaf { counts: if k == 0 { vec![1, 0] } else { vec![0, 1] } }] };
        let f = Forest {
            version: MODEL_VERSION,
            feature_set_kind: None,
            normalization: None,
            n_features: 1,
            n_trees: 2,
            label_vocab: vec![s3, s1],
            config: small_config(2),
            n_train_samples: 1,
            trees: vec![leaf(1), leaf(0)],
            bootstraps: vec![],
        };
        assert_eq!(s3.to_string(), "001000");
        assert_eq!(f.predict_label(&[0.0]).unwrap(), s3);
        assert!(f.predict(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn oob_coverage_near_expectation() {
        let ds = blobs(40, 6);
        let f = train_forest(&ds, &small_config(120)).unwrap();
        let counts = f.oob_tree_counts();
        let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        // A sample is left out of a bootstrap with probability (1 - 1/n)^n.
        let n = ds.len() as f64;
        let expected = (1.0 - 1.0 / n).powf(n) * 120.0;
        assert!((mean - expected).abs() < 0.1 * expected, "{mean} vs {expected}");
    }

    #[test]
    fn json_round_trip_restores_bootstraps() {
        let ds = blobs(20, 7);
        let f = train_forest(&ds, &small_config(6)).unwrap();
        let text = f.to_json();
        let g = Forest::from_json(&text).unwrap();
        assert_eq!(g, f);
        assert_eq!(g.bootstraps, f.bootstraps);
        assert_eq!(g.to_json(), text);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["version", "feature_set_kind", "n_trees", "trees", "label_vocab", "config"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn corrupt_model_rejected() {
        let ds = blobs(10, 8);
        let f = train_forest(&ds, &small_config(2)).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&f.to_json()).unwrap();
        v["n_trees"] = 3.into();
        assert!(Forest::from_json(&v.to_string()).is_err());
    }

    fn shape(t: &Tree) -> Vec<(usize, u32, u32, Vec<u32>)> {
        t.nodes
            .iter()
            .map(|n| match n {
                TreeNode::Split { feature, left, right, .. } => (*feature, *left, *right, vec![]),
                TreeNode::Leaf { counts } => (usize::MAX, 0, 0, counts.clone()),
            })
            .collect()
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn monotone_transform_keeps_partitions(
            raw in proptest::collection::vec(-3.0f64..3.0, 3 * 40),
            labels in proptest::collection::vec(0u8..3, 40),
            feature in 0usize..3,
        ) {
            let codes = [FaultCode::NORMAL, FaultCode::from_switches(&[1]), FaultCode::from_switches(&[4])];
            let rows: Vec<Vec<f64>> = raw.chunks(3).map(|c| c.to_vec()).collect();
            let ys: Vec<FaultCode> = labels.iter().map(|&l| codes[l as usize]).collect();
            proptest::prop_assume!(ys.iter().collect::<std::collections::BTreeSet<_>>().len() >= 2);
            let warped: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    r[feature] = r[feature].powi(3) + 2.0 * r[feature];
                    r
                })
                .collect();
            let cfg = TrainConfig { n_trees: 5, seed: 4, ..Default::default() };
            let a = train_forest(&Dataset::from_rows(&rows, &ys).unwrap(), &cfg).unwrap();
            let b = train_forest(&Dataset::from_rows(&warped, &ys).unwrap(), &cfg).unwrap();
            for (ta, tb) in a.trees.iter().zip(&b.trees) {
                proptest::prop_assert_eq!(shape(ta), shape(tb));
            }
            // Every tree sends each of its bootstrap rows to the same leaf.
            for (t, (ta, tb)) in a.trees.iter().zip(&b.trees).enumerate() {
                for &i in a.bootstrap(t) {
                    let i = i as usize;
                    proptest::prop_assert_eq!(ta.leaf(&rows[i]), tb.leaf(&warped[i]));
                }
            }
        }
    }
}
