//! CART decision tree (Gini impurity, greedy binary splits) with pruning to
//! a feature budget.
//!
//! The tree is grown greedily, then split nodes of the least-important
//! surplus feature (by total weighted impurity decrease) are collapsed into
//! leaves until at most `m` distinct features remain in split nodes. The
//! surviving features, ranked by total impurity decrease, form the gold set
//! used by the evaluation protocol.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::data::Dataset;
use crate::error::{AvaError, Result};
use crate::models::{check_dim, Capabilities, Predictor};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 30,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Node {
    class_counts: Vec<usize>,
    split: Option<Split>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Split {
    feature: usize,
    threshold: f64,
    left: usize,
    right: usize,
    /// (n_node / N) * (gini - weighted child gini)
    impurity_decrease: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    root: usize,
    n_features: usize,
    n_classes: usize,
}

fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    data: &'a Dataset,
    config: &'a TreeConfig,
    nodes: Vec<Node>,
    n_total: f64,
}

impl<'a> Builder<'a> {
    fn grow(&mut self, indices: &[usize], depth: usize) -> usize {
        let mut counts = vec![0usize; self.data.n_classes()];
        for &j in indices {
            counts[self.data.label(j)] += 1;
        }
        let node_gini = gini(&counts);
        let leaf = Node {
            class_counts: counts.clone(),
            split: None,
        };
        if node_gini == 0.0
            || indices.len() < self.config.min_samples_split
            || depth >= self.config.max_depth
        {
            self.nodes.push(leaf);
            return self.nodes.len() - 1;
        }

        let mut best: Option<(usize, f64, f64)> = None; // feature, threshold, decrease
        for f in 0..self.data.n_features() {
            let mut sorted: Vec<usize> = indices.to_vec();
            sorted.sort_by(|&a, &b| {
                self.data.features()[(f, a)].total_cmp(&self.data.features()[(f, b)])
            });
            let mut left = vec![0usize; self.data.n_classes()];
            let mut right = counts.clone();
            let n = indices.len() as f64;
            for w in 0..sorted.len() - 1 {
                let j = sorted[w];
                left[self.data.label(j)] += 1;
                right[self.data.label(j)] -= 1;
                let v = self.data.features()[(f, j)];
                let v_next = self.data.features()[(f, sorted[w + 1])];
                if v == v_next {
                    continue;
                }
                let nl = (w + 1) as f64;
                let nr = n - nl;
                let decrease = node_gini - (nl / n) * gini(&left) - (nr / n) * gini(&right);
                if best.is_none_or(|(_, _, d)| decrease > d + 1e-15) {
                    best = Some((f, 0.5 * (v + v_next), decrease));
                }
            }
        }

        match best {
            Some((feature, threshold, decrease)) if decrease > 1e-12 => {
                let (li, ri): (Vec<usize>, Vec<usize>) = indices
                    .iter()
                    .partition(|&&j| self.data.features()[(feature, j)] <= threshold);
                let left = self.grow(&li, depth + 1);
                let right = self.grow(&ri, depth + 1);
                let weighted = indices.len() as f64 / self.n_total * decrease;
                self.nodes.push(Node {
                    class_counts: counts,
                    split: Some(Split {
                        feature,
                        threshold,
                        left,
                        right,
                        impurity_decrease: weighted,
                    }),
                });
                self.nodes.len() - 1
            }
            _ => {
                self.nodes.push(leaf);
                self.nodes.len() - 1
            }
        }
    }
}

impl DecisionTree {
    /// Total impurity decrease per feature over reachable split nodes.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut imp = vec![0.0; self.n_features];
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            if let Some(split) = &self.nodes[i].split {
                imp[split.feature] += split.impurity_decrease;
                stack.push(split.left);
                stack.push(split.right);
            }
        }
        imp
    }

    /// Features appearing in reachable split nodes.
    pub fn used_features(&self) -> BTreeSet<usize> {
        self.feature_importance()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Used features ranked by total impurity decrease (ties: lower index).
    pub fn ranked_features(&self) -> Vec<usize> {
        let imp = self.feature_importance();
        let mut used: Vec<usize> = self.used_features().into_iter().collect();
        used.sort_by(|&a, &b| imp[b].total_cmp(&imp[a]).then(a.cmp(&b)));
        used
    }

    /// Collapse split nodes until at most `m` distinct features remain,
    /// dropping the least important surplus feature each round.
    fn prune_to_features(&mut self, m: usize) {
        loop {
            let imp = self.feature_importance();
            let used: Vec<usize> = self.used_features().into_iter().collect();
            if used.len() <= m {
                return;
            }
            let weakest = *used
                .iter()
                .min_by(|&&a, &&b| imp[a].total_cmp(&imp[b]).then(a.cmp(&b)))
                .unwrap();
            for node in &mut self.nodes {
                if node.split.as_ref().is_some_and(|s| s.feature == weakest) {
                    node.split = None;
                }
            }
        }
    }
}

/// Grow a CART tree and prune it to at most `m` distinct split features.
/// Returns the tree and its used features ranked by impurity decrease.
pub fn train_decision_tree(train: &Dataset, m: usize) -> Result<(DecisionTree, Vec<usize>)> {
    train_decision_tree_with(train, m, &TreeConfig::default())
}

pub fn train_decision_tree_with(
    train: &Dataset,
    m: usize,
    config: &TreeConfig,
) -> Result<(DecisionTree, Vec<usize>)> {
    if m == 0 {
        return Err(AvaError::InvalidArgument("m must be >= 1".into()));
    }
    let indices: Vec<usize> = (0..train.n_points()).collect();
    let mut builder = Builder {
        data: train,
        config,
        nodes: Vec::new(),
        n_total: train.n_points() as f64,
    };
    let root = builder.grow(&indices, 0);
    let mut tree = DecisionTree {
        nodes: builder.nodes,
        root,
        n_features: train.n_features(),
        n_classes: train.n_classes(),
    };
    tree.prune_to_features(m);
    let ranked = tree.ranked_features();
    Ok((tree, ranked))
}

impl Predictor for DecisionTree {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn name(&self) -> &'static str {
        "decision_tree"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            input_gradient: false,
            param_gradient: false,
            hvp: false,
        }
    }

    fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_features, x)?;
        let mut i = self.root;
        while let Some(split) = &self.nodes[i].split {
            i = if x[split.feature] <= split.threshold {
                split.left
            } else {
                split.right
            };
        }
        let counts = &self.nodes[i].class_counts;
        let total: usize = counts.iter().sum();
        Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }
}
