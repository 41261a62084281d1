use crate::error::{Error, Result};

/// Improvements smaller than this are treated as ties.
pub const SPLIT_EPSILON: f64 = 1e-12;

/// Gini impurity `1 - sum p_c^2` of a class histogram.
pub fn gini(counts: &[usize]) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::Empty("class counts"));
    }
    let c: Vec<f64> = counts.iter().map(|&k| k as f64).collect();
    Ok(gini_of(&c, total))
}

#[inline]
pub(crate) fn gini_of<C: Copy + Into<f64>>(counts: &[C], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let sum_sq: f64 = counts.iter().map(|&c| {
        let p = c.into() / n;
        p * p
    }).sum();
    1.0 - sum_sq
}

/// A row-major feature matrix with class-index targets.
#[derive(Debug, Clone, Copy)]
pub struct Samples<'a> {
    pub features: &'a [f64],
    pub n_features: usize,
    pub targets: &'a [u16],
    pub n_classes: usize,
}

impl<'a> Samples<'a> {
    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.features[row * self.n_features + feature]
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Count-weighted mean of the two children's Gini impurity.
    pub impurity: f64,
}

/// Scratch buffers reused across nodes.
#[derive(Debug, Default)]
pub struct SplitScratch {
    pairs: Vec<(f64, u16)>,
    left: Vec<u32>,
    right: Vec<u32>,
}

/// Best axis-aligned split of `subset` (row indices, repeats allowed) over
/// the `candidates` features. Rows with `x <= threshold` go left. Only
/// splits leaving at least `min_leaf` rows per side and lowering impurity
/// are considered; ties go to the lowest feature, then the lowest threshold.
pub fn best_split(
    data: &Samples<'_>,
    subset: &[usize],
    candidates: &[usize],
    min_leaf: usize,
    scratch: &mut SplitScratch,
) -> Option<Split> {
    let n = subset.len();
    let min_leaf = min_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    let mut total = vec![0u32; data.n_classes];
    for &i in subset {
        total[data.targets[i] as usize] += 1;
    }
    let parent = gini_of(&total, n);
    let mut best: Option<Split> = None;
    let mut order: Vec<usize> = candidates.to_vec();
    order.sort_unstable();
    order.dedup();
    for f in order {
        scratch.pairs.clear();
        scratch.pairs.extend(subset.iter().map(|&i| (data.value(i, f), data.targets[i])));
        scratch.pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        scratch.left.clear();
        scratch.left.resize(data.n_classes, 0);
        scratch.right.clear();
        scratch.right.extend_from_slice(&total);
        for k in 0..n - 1 {
            let (x, c) = scratch.pairs[k];
            scratch.left[c as usize] += 1;
            scratch.right[c as usize] -= 1;
            let next = scratch.pairs[k + 1].0;
            let n_left = k + 1;
            if next <= x || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let weighted = (n_left as f64 * gini_of(&scratch.left, n_left)
                + (n - n_left) as f64 * gini_of(&scratch.right, n - n_left))
                / n as f64;
            if weighted >= parent - SPLIT_EPSILON {
                continue;
            }
            if best.map_or(true, |b| weighted < b.impurity - SPLIT_EPSILON) {
                best = Some(Split { feature: f, threshold: midpoint(x, next), impurity: weighted });
            }
        }
    }
    best
}

/// Midpoint of `a < b` that still sends `a` left and `b` right.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = (a + b) / 2.0;
    if m >= b || m < a {
        a
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive search written independently: every feature, every
    /// midpoint between distinct sorted values, impurity recomputed from
    /// scratch by partitioning the subset.
    fn brute_force(data: &Samples<'_>, subset: &[usize], candidates: &[usize], min_leaf: usize) -> Option<Split> {
        let impurity = |rows: &[usize]| {
            let mut c = vec![0usize; data.n_classes];
            rows.iter().for_each(|&i| c[data.targets[i] as usize] += 1);
            gini(&c).unwrap()
        };
        let parent = impurity(subset);
        let mut feats = candidates.to_vec();
        feats.sort();
        let mut best: Option<Split> = None;
        for &f in &feats {
            let mut vals: Vec<f64> = subset.iter().map(|&i| data.value(i, f)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let (l, r): (Vec<usize>, Vec<usize>) = subset.iter().partition(|&&i| data.value(i, f) <= t);
                if l.len() < min_leaf || r.len() < min_leaf {
                    continue;
                }
                let n = subset.len() as f64;
                let w_imp = (l.len() as f64 * impurity(&l) + r.len() as f64 * impurity(&r)) / n;
                if w_imp < parent - SPLIT_EPSILON && best.map_or(true, |b| w_imp < b.impurity - SPLIT_EPSILON) {
                    best = Some(Split { feature: f, threshold: t, impurity: w_imp });
                }
            }
        }
        best
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[10, 0]).unwrap(), 0.0);
        assert_eq!(gini(&[5, 5]).unwrap(), 0.5);
        assert!((gini(&[2, 3, 5]).unwrap() - 0.62).abs() < 1e-15);
        assert!(gini(&[0, 0]).is_err());
        assert!(gini(&[]).is_err());
    }

    #[test]
    fn separable_line() {
        let x = [0.0, 1.0, 10.0, 11.0];
        let y = [0u16, 0, 1, 1];
        let data = Samples { features: &x, n_features: 1, targets: &y, n_classes: 2 };
        let s = best_split(&data, &[0, 1, 2, 3], &[0], 1, &mut SplitScratch::default()).unwrap();
        assert_eq!((s.feature, s.threshold, s.impurity), (0, 5.5, 0.0));
    }

    #[test]
    fn constant_feature_has_no_split() {
        let x = [3.0; 4];
        let y = [0u16, 1, 0, 1];
        let data = Samples { features: &x, n_features: 1, targets: &y, n_classes: 2 };
        assert!(best_split(&data, &[0, 1, 2, 3], &[0], 1, &mut SplitScratch::default()).is_none());
    }

    #[test]
    fn pure_subset_has_no_split() {
        let x = [0.0, 1.0, 2.0];
        let y = [1u16; 3];
        let data = Samples { features: &x, n_features: 1, targets: &y, n_classes: 2 };
        assert!(best_split(&data, &[0, 1, 2], &[0], 1, &mut SplitScratch::default()).is_none());
    }

    #[test]
    fn tie_prefers_lowest_feature() {
        // Features 0 and 1 separate the classes equally well.
        let x = [0.0, 5.0, 1.0, 6.0, 2.0, 7.0, 3.0, 8.0];
        let y = [0u16, 0, 1, 1];
        let data = Samples { features: &x, n_features: 2, targets: &y, n_classes: 2 };
        let s = best_split(&data, &[0, 1, 2, 3], &[1, 0], 1, &mut SplitScratch::default()).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 1.5);
    }

    pub(crate) fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u16>, usize, usize, usize)> {
        (1usize..=5, 2usize..=50, 2usize..=3, 1usize..=3).prop_flat_map(|(nf, n, nc, leaf)| {
            (
                // A small value grid forces plenty of ties.
                prop::collection::vec((0i32..8).prop_map(|v| v as f64 * 0.5), nf * n),
                prop::collection::vec(0u16..nc as u16, n),
                Just(nf),
                Just(nc),
                Just(leaf),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn matches_exhaustive_search((x, y, nf, nc, leaf) in instance()) {
            let data = Samples { features: &x, n_features: nf, targets: &y, n_classes: nc };
            let subset: Vec<usize> = (0..y.len()).collect();
            let cand: Vec<usize> = (0..nf).collect();
            let got = best_split(&data, &subset, &cand, leaf, &mut SplitScratch::default());
            let want = brute_force(&data, &subset, &cand, leaf);
            prop_assert_eq!(got.map(|s| (s.feature, s.threshold)), want.map(|s| (s.feature, s.threshold)));
            if let (Some(g), Some(w)) = (got, want) {
                prop_assert!((g.impurity - w.impurity).abs() < 1e-12);
            }
        }

        #[test]
        fn gini_bounds(counts in prop::collection::vec(0usize..50, 1..6)) {
            prop_assume!(counts.iter().sum::<usize>() > 0);
            let g = gini(&counts).unwrap();
            let c = counts.len() as f64;
            prop_assert!(g >= 0.0 && g <= 1.0 - 1.0 / c + 1e-12);
            let pure = counts.iter().filter(|&&k| k > 0).count() == 1;
            prop_assert_eq!(g == 0.0, pure);
        }
    }
}
