//! CART decision trees, random forests, F1 scoring and depth selection.

mod cart;
mod forest;
mod metrics;
mod select;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cart::{gini, train_tree, train_tree_with, TreeOptions};
pub use forest::{train_forest, ForestModel, ForestOptions};
pub use metrics::{score, ClassScores};
pub use select::{argmax_depth, depth_grid_search, select_easy_classes, GridSearchResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { class_id: u16 },
}

/// A trained tree stored as a flat node array; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<TreeNode>,
    pub max_depth: usize,
    pub n_features: usize,
    pub class_ids: Vec<u16>,
}

/// Anything that maps a feature vector to a class id.
pub trait Classifier: Sync {
    fn predict(&self, x: &[f64]) -> Result<u16>;
    fn class_ids(&self) -> &[u16];
}

impl TreeModel {
    /// Leaf reached by `x`: values `<= threshold` go left.
    pub fn predict(&self, x: &[f64]) -> Result<u16> {
        Ok(self.predict_path(x)?.0)
    }

    /// Predicted class and the number of split nodes visited.
    pub fn predict_path(&self, x: &[f64]) -> Result<(u16, usize)> {
        if x.len() != self.n_features {
            return Err(Error::Shape(format!(
                "tree expects {} features, got {}",
                self.n_features,
                x.len()
            )));
        }
        let mut node = 0;
        let mut visits = 0;
        loop {
            match self.nodes[node] {
                TreeNode::Leaf { class_id } => return Ok((class_id, visits)),
                TreeNode::Split { feature, threshold, left, right } => {
                    visits += 1;
                    node = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    /// Depth of the deepest leaf (a lone root leaf has depth 0).
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(&self.nodes, 0)
        }
    }

    /// Checks that the nodes form a proper binary tree rooted at 0 and that
    /// every leaf is within `max_depth` and carries a known class.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Format("tree has no nodes".into()));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, depth)) = stack.pop() {
            if i >= self.nodes.len() || seen[i] {
                return Err(Error::Format(format!("node {i} out of range or reached twice")));
            }
            seen[i] = true;
            match self.nodes[i] {
                TreeNode::Leaf { class_id } => {
                    if depth > self.max_depth {
                        return Err(Error::Format(format!("leaf {i} at depth {depth} > {}", self.max_depth)));
                    }
                    if !self.class_ids.contains(&class_id) {
                        return Err(Error::Format(format!("leaf {i} has unknown class {class_id}")));
                    }
                }
                TreeNode::Split { feature, threshold, left, right } => {
                    if feature >= self.n_features || !threshold.is_finite() {
                        return Err(Error::Format(format!("split {i} has bad feature/threshold")));
                    }
                    stack.push((left, depth + 1));
                    stack.push((right, depth + 1));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Format("unreachable nodes in tree".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: TreeModel = serde_json::from_str(s)?;
        t.validate()?;
        Ok(t)
    }
}

impl Classifier for TreeModel {
    fn predict(&self, x: &[f64]) -> Result<u16> {
        TreeModel::predict(self, x)
    }

    fn class_ids(&self) -> &[u16] {
        &self.class_ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stump(threshold: f64) -> TreeModel {
        TreeModel {
            nodes: vec![
                TreeNode::Split { feature: 1, threshold, left: 1, right: 2 },
                TreeNode::Leaf { class_id: 4 },
                TreeNode::Leaf { class_id: 9 },
            ],
            max_depth: 1,
            n_features: 2,
            class_ids: vec![4, 9],
        }
    }

    #[test]
    fn single_leaf() {
        let t = TreeModel { nodes: vec![TreeNode::Leaf { class_id: 3 }], max_depth: 4, n_features: 1, class_ids: vec![3] };
        assert_eq!(t.predict(&[1e9]).unwrap(), 3);
        assert_eq!(t.predict_path(&[-1.0]).unwrap(), (3, 0));
    }

    #[test]
    fn equal_goes_left() {
        let t = stump(0.5);
        assert_eq!(t.predict(&[0.0, 0.5]).unwrap(), 4);
        assert_eq!(t.predict(&[0.0, 0.5000001]).unwrap(), 9);
    }

    #[test]
    fn feature_count_mismatch() {
        assert!(matches!(stump(0.0).predict(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn validate_rejects_cycles() {
        let mut t = stump(0.0);
        t.nodes[0] = TreeNode::Split { feature: 0, threshold: 0.0, left: 0, right: 2 };
        assert!(t.validate().is_err());
    }

    /// Recursive reference walker over the same node array.
    fn walk(t: &TreeModel, i: usize, x: &[f64]) -> u16 {
        match &t.nodes[i] {
            TreeNode::Leaf { class_id } => *class_id,
            TreeNode::Split { feature, threshold, left, right } => {
                if x[*feature] > *threshold {
                    walk(t, *right, x)
                } else {
                    walk(t, *left, x)
                }
            }
        }
    }

    fn random_tree(depth: usize, seeds: &[f64]) -> TreeModel {
        fn build(nodes: &mut Vec<TreeNode>, depth: usize, seeds: &[f64], k: &mut usize) -> usize {
            let idx = nodes.len();
            let s = seeds[*k % seeds.len()];
            *k += 1;
            if depth == 0 || s < -0.7 {
                nodes.push(TreeNode::Leaf { class_id: ((s.abs() * 10.0) as u16) % 3 });
                return idx;
            }
            nodes.push(TreeNode::Leaf { class_id: 0 });
            let left = build(nodes, depth - 1, seeds, k);
            let right = build(nodes, depth - 1, seeds, k);
            nodes[idx] = TreeNode::Split { feature: (*k * 7) % 3, threshold: s, left, right };
            idx
        }
        let mut nodes = Vec::new();
        build(&mut nodes, depth, seeds, &mut 0);
        TreeModel { nodes, max_depth: depth, n_features: 3, class_ids: vec![0, 1, 2] }
    }

    proptest! {
        #[test]
        fn agrees_with_recursive_walker(
            seeds in proptest::collection::vec(-1.0f64..1.0, 1..40),
            depth in 0usize..6,
            xs in proptest::collection::vec(proptest::array::uniform3(-1.0f64..1.0), 20),
        ) {
            let t = random_tree(depth, &seeds);
            prop_assert!(t.validate().is_ok());
            for x in &xs {
                prop_assert_eq!(t.predict(x).unwrap(), walk(&t, 0, x));
            }
        }

        #[test]
        fn json_round_trip_is_lossless(th in proptest::num::f64::NORMAL) {
            let t = stump(th);
            let back = TreeModel::from_json(&t.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
