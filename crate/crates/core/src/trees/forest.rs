use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cart::{train_tree_with, TreeOptions};
use super::{Classifier, TreeModel};
use crate::data::FeatureVector;
use crate::error::{Error, Result};
use crate::exec::{derive_seed, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestOptions {
    /// Resample N rows with replacement for every tree.
    pub bootstrap: bool,
    /// Examine floor(sqrt(F)) random features per split.
    pub sqrt_features: bool,
}

impl Default for ForestOptions {
    fn default() -> Self {
        ForestOptions { bootstrap: true, sqrt_features: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub n_trees: usize,
    pub class_ids: Vec<u16>,
}

pub fn train_forest(
    features: &[FeatureVector],
    n_trees: usize,
    max_depth: usize,
    seed: u64,
    opts: ForestOptions,
    exec: Execution,
) -> Result<ForestModel> {
    if features.is_empty() {
        return Err(Error::EmptyDataset("cannot train a forest on zero samples".into()));
    }
    if n_trees < 1 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    let n_features = features[0].values.len();
    let tree_opts = TreeOptions {
        max_features: opts.sqrt_features.then(|| ((n_features as f64).sqrt().floor() as usize).max(1)),
    };
    let trees = exec
        .map_range(n_trees, |t| {
            let tree_seed = derive_seed(seed, t as u64);
            if opts.bootstrap {
                let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
                let resample: Vec<FeatureVector> =
                    (0..features.len()).map(|_| features[rng.gen_range(0..features.len())].clone()).collect();
                train_tree_with(&resample, max_depth, tree_seed, tree_opts)
            } else {
                train_tree_with(features, max_depth, tree_seed, tree_opts)
            }
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut class_ids: Vec<u16> = features.iter().map(|f| f.label).collect();
    class_ids.sort_unstable();
    class_ids.dedup();
    Ok(ForestModel { n_trees: trees.len(), trees, class_ids })
}

/// Majority vote; ties go to the smallest class id.
pub(crate) fn vote(votes: impl IntoIterator<Item = u16>) -> Option<u16> {
    let mut v: Vec<u16> = votes.into_iter().collect();
    v.sort_unstable();
    let mut best: Option<(u16, usize)> = None;
    let mut i = 0;
    while i < v.len() {
        let j = v[i..].iter().take_while(|&&c| c == v[i]).count();
        if best.is_none_or(|(_, n)| j > n) {
            best = Some((v[i], j));
        }
        i += j;
    }
    best.map(|(c, _)| c)
}

impl ForestModel {
    pub fn predict(&self, x: &[f64]) -> Result<u16> {
        let votes = self.trees.iter().map(|t| t.predict(x)).collect::<Result<Vec<_>>>()?;
        vote(votes).ok_or_else(|| Error::invalid("forest has no trees"))
    }

    pub fn n_nodes(&self) -> usize {
        self.trees.iter().map(|t| t.n_nodes()).sum()
    }
}

impl Classifier for ForestModel {
    fn predict(&self, x: &[f64]) -> Result<u16> {
        ForestModel::predict(self, x)
    }

    fn class_ids(&self) -> &[u16] {
        &self.class_ids
    }
}
