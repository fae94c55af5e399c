//! Greedy CART growth with Gini impurity.
//!
//! Split quality is compared exactly: for a split into children with sizes
//! `nl`, `nr` and squared-count sums `sl`, `sr`, the weighted child Gini is
//! `1 - (sl/nl + sr/nr) / n`, so the best split maximizes `sl/nl + sr/nr`.
//! That ratio is compared by u128 cross-multiplication, which keeps tie-breaks
//! (lowest feature, then lowest threshold) independent of rounding.

use std::cmp::Ordering;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{TreeModel, TreeNode};
use crate::data::FeatureVector;
use crate::error::{Error, Result};

/// `1 - sum p_i^2` of a class histogram.
pub fn gini(counts: &[u64]) -> Result<f64> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::invalid("gini of an all-zero histogram"));
    }
    let n = n as f64;
    Ok(1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TreeOptions {
    /// Features examined per split; `None` examines all of them.
    pub max_features: Option<usize>,
}

/// Exact rational `num / den`.
#[derive(Debug, Clone, Copy)]
struct Ratio {
    num: u128,
    den: u128,
}

impl Ratio {
    fn cmp(&self, other: &Ratio) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: Ratio,
}

struct Builder<'a> {
    data: &'a [FeatureVector],
    class_ids: Vec<u16>,
    n_features: usize,
    max_depth: usize,
    opts: TreeOptions,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn class_index(&self, label: u16) -> usize {
        self.class_ids.binary_search(&label).expect("label collected at start")
    }

    fn histogram(&self, idx: &[usize]) -> Vec<u64> {
        let mut h = vec![0u64; self.class_ids.len()];
        for &i in idx {
            h[self.class_index(self.data[i].label)] += 1;
        }
        h
    }

    fn majority(&self, hist: &[u64]) -> u16 {
        // first maximum = smallest class id
        let mut best = 0;
        for (k, &c) in hist.iter().enumerate() {
            if c > hist[best] {
                best = k;
            }
        }
        self.class_ids[best]
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        match self.opts.max_features {
            Some(m) if m < self.n_features => {
                let mut f = sample(&mut self.rng, self.n_features, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..self.n_features).collect(),
        }
    }

    fn best_split(&mut self, idx: &[usize], parent_hist: &[u64]) -> Option<Candidate> {
        let n = idx.len() as u128;
        let s_parent: u128 = parent_hist.iter().map(|&c| (c as u128) * (c as u128)).sum();
        // must beat the parent: sl/nl + sr/nr > s/n
        let mut best: Option<Candidate> = None;
        let mut bar = Ratio { num: s_parent, den: n };
        let mut order: Vec<usize> = idx.to_vec();
        for f in self.candidate_features() {
            order.sort_by(|&a, &b| self.data[a].values[f].total_cmp(&self.data[b].values[f]));
            let mut left = vec![0u64; parent_hist.len()];
            let mut sl: u128 = 0;
            let mut sr: u128 = s_parent;
            for pos in 0..order.len() - 1 {
                let k = self.class_index(self.data[order[pos]].label);
                // moving one sample of class k from right to left
                let (l, r) = (left[k] as u128, (parent_hist[k] - left[k]) as u128);
                sl += 2 * l + 1;
                sr -= 2 * r - 1;
                left[k] += 1;
                let a = self.data[order[pos]].values[f];
                let b = self.data[order[pos + 1]].values[f];
                if a >= b {
                    continue;
                }
                let nl = (pos + 1) as u128;
                let nr = n - nl;
                let score = Ratio { num: sl * nr + sr * nl, den: nl * nr };
                if score.cmp(&bar) == Ordering::Greater {
                    let mut threshold = a + (b - a) / 2.0;
                    if !(threshold < b) {
                        threshold = a;
                    }
                    bar = score;
                    best = Some(Candidate { feature: f, threshold, score });
                }
            }
        }
        best.inspect(|c| debug_assert!(c.score.den > 0))
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let hist = self.histogram(idx);
        let node = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { class_id: self.majority(&hist) });
        let pure = hist.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.max_depth || idx.len() < 2 {
            return node;
        }
        let Some(split) = self.best_split(idx, &hist) else {
            return node;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.data[i].values[split.feature] <= split.threshold);
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.nodes[node] = TreeNode::Split { feature: split.feature, threshold: split.threshold, left, right };
        node
    }
}

/// Grows a Gini tree over every feature. `rng_seed` only matters when
/// feature subsampling is enabled through [`train_tree_with`].
pub fn train_tree(features: &[FeatureVector], max_depth: usize, rng_seed: u64) -> Result<TreeModel> {
    train_tree_with(features, max_depth, rng_seed, TreeOptions::default())
}

pub fn train_tree_with(
    features: &[FeatureVector],
    max_depth: usize,
    rng_seed: u64,
    opts: TreeOptions,
) -> Result<TreeModel> {
    if features.is_empty() {
        return Err(Error::EmptyDataset("cannot train a tree on zero samples".into()));
    }
    if max_depth < 1 {
        return Err(Error::invalid("max_depth must be at least 1"));
    }
    let n_features = features[0].values.len();
    if features.iter().any(|f| f.values.len() != n_features) {
        return Err(Error::Shape("feature vectors of unequal length".into()));
    }
    if features.iter().any(|f| f.values.iter().any(|v| v.is_nan())) {
        return Err(Error::invalid("NaN feature value"));
    }
    let mut class_ids: Vec<u16> = features.iter().map(|f| f.label).collect();
    class_ids.sort_unstable();
    class_ids.dedup();
    let mut b = Builder {
        data: features,
        class_ids,
        n_features,
        max_depth,
        opts,
        rng: ChaCha8Rng::seed_from_u64(rng_seed),
        nodes: Vec::new(),
    };
    let idx: Vec<usize> = (0..features.len()).collect();
    b.grow(&idx, 0);
    Ok(TreeModel { nodes: b.nodes, max_depth, n_features, class_ids: b.class_ids })
}
