use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::split::{best_split, Samples, SplitScratch};

/// Growth limits for a single tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub mtry: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, left: u32, right: u32 },
    Leaf { counts: Vec<u32> },
}

/// A CART tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    /// Index of the leaf reached by `x`.
    pub fn leaf(&self, x: &[f64]) -> usize {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left as usize } else { *right as usize };
                }
                TreeNode::Leaf { .. } => return i,
            }
        }
    }

    /// Majority class of the leaf reached by `x`; ties go to the lowest
    /// class index.
    pub fn predict(&self, x: &[f64]) -> usize {
        match &self.nodes[self.leaf(x)] {
            TreeNode::Leaf { counts } => majority(counts),
            TreeNode::Split { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, *left as usize).max(go(t, *right as usize)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }
}

pub(crate) fn majority<C: Copy + PartialOrd + Default>(counts: &[C]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

/// Grows a tree on `subset` (row indices, repeats allowed).
///
/// At each node a random permutation of the features is drawn and the
/// first `mtry` are searched. If none of them yields an improving split the
/// search continues through the rest of the permutation one feature at a
/// time, so a node only becomes a leaf when no feature can split it.
pub fn grow_tree<R: Rng>(data: &Samples<'_>, subset: Vec<usize>, params: &GrowParams, rng: &mut R) -> Tree {
    let mut nodes = vec![TreeNode::Leaf { counts: Vec::new() }];
    let mut stack = vec![(0usize, subset, 0usize)];
    let mut scratch = SplitScratch::default();
    let mut perm: Vec<usize> = (0..data.n_features).collect();
    let mtry = params.mtry.clamp(1, data.n_features.max(1));
    while let Some((id, rows, depth)) = stack.pop() {
        let mut counts = vec![0u32; data.n_classes];
        for &i in &rows {
            counts[data.targets[i] as usize] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_ok = params.max_depth.map_or(true, |d| depth < d);
        let split = if pure || !depth_ok {
            None
        } else {
            perm.shuffle(rng);
            let mut found = None;
            let mut k = mtry;
            while found.is_none() && k <= perm.len() {
                found = best_split(data, &rows, &perm[..k], params.min_samples_leaf, &mut scratch);
                k += 1;
            }
            found
        };
        match split {
            None => nodes[id] = TreeNode::Leaf { counts },
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.into_iter().partition(|&i| data.value(i, s.feature) <= s.threshold);
                let left = nodes.len();
                nodes.push(TreeNode::Leaf { counts: Vec::new() });
                nodes.push(TreeNode::Leaf { counts: Vec::new() });
                nodes[id] = TreeNode::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: left as u32,
                    right: left as u32 + 1,
                };
                stack.push((left + 1, r, depth + 1));
                stack.push((left, l, depth + 1));
            }
        }
    }
    Tree { nodes }
}
