//! CART decision tree on Gini impurity.

use serde::{Deserialize, Serialize};

use super::{argmax_count, LabeledDataset};
use crate::error::{Error, Result};

/// `Σ p_i (1 − p_i)` over a class-probability vector.
pub fn gini_impurity(p: &[f64]) -> Result<f64> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Domain(
            "probabilities must be finite and >= 0".into(),
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "probabilities sum to {total}, expected 1"
        )));
    }
    Ok(p.iter().map(|&pi| pi * (1.0 - pi)).sum())
}

fn gini_counts(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * p
        })
        .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DtParams {
    pub max_depth: usize,
    /// Minimum samples on each side of a split.
    pub min_leaf: usize,
    /// Cap on candidate thresholds per feature at a node.
    pub n_thresholds: usize,
}

impl Default for DtParams {
    fn default() -> Self {
        DtParams {
            max_depth: 12,
            min_leaf: 1,
            n_thresholds: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        class: usize,
        distribution: Vec<f64>,
    },
    /// Samples with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        impurity: f64,
        child_impurity: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub params: DtParams,
    /// Arena of nodes; index 0 is the root.
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let leaf = *self.decision_path(x).last().expect("tree has a root");
        match &self.nodes[leaf] {
            TreeNode::Leaf { class, .. } => *class,
            TreeNode::Split { .. } => unreachable!("paths end at leaves"),
        }
    }

    /// Node indices visited from the root to the leaf that decides `x`.
    pub fn decision_path(&self, x: &[f64]) -> Vec<usize> {
        let mut path = vec![0];
        let mut at = 0;
        while let TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } = &self.nodes[at]
        {
            at = if x[*feature] < *threshold {
                *left
            } else {
                *right
            };
            path.push(at);
        }
        path
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

struct Builder<'a> {
    data: &'a LabeledDataset,
    params: &'a DtParams,
    nodes: Vec<TreeNode>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    child_impurity: f64,
}

/// Midpoints between consecutive distinct sorted values, thinned to at most
/// `cap` evenly spaced candidates.
fn candidate_thresholds(sorted: &[f64], cap: usize) -> Vec<f64> {
    let mids: Vec<f64> = sorted
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| w[0] + (w[1] - w[0]) / 2.0)
        .collect();
    if mids.len() <= cap {
        return mids;
    }
    (0..cap)
        .map(|j| mids[(j * mids.len() + mids.len() / 2) / cap])
        .collect()
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.data.n_classes()];
        for &i in idx {
            counts[self.data.labels[i]] += 1;
        }
        counts
    }

    fn leaf(&mut self, counts: &[usize], n: usize) -> usize {
        let node = TreeNode::Leaf {
            class: argmax_count(counts),
            distribution: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        };
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn best_split(&self, idx: &[usize]) -> Option<BestSplit> {
        let n = idx.len();
        let k = self.data.n_classes();
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<BestSplit> = None;
        let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
        for f in 0..self.data.dim() {
            order.clear();
            order.extend(
                idx.iter()
                    .map(|&i| (self.data.vectors[i][f], self.data.labels[i])),
            );
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let values: Vec<f64> = order.iter().map(|p| p.0).collect();
            let thresholds = candidate_thresholds(&values, self.params.n_thresholds.max(1));
            let mut left = vec![0usize; k];
            let mut right = vec![0usize; k];
            for &(_, l) in &order {
                right[l] += 1;
            }
            let mut moved = 0;
            for t in thresholds {
                while moved < n && order[moved].0 < t {
                    let l = order[moved].1;
                    left[l] += 1;
                    right[l] -= 1;
                    moved += 1;
                }
                let (nl, nr) = (moved, n - moved);
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let weighted = (nl as f64 * gini_counts(&left, nl)
                    + nr as f64 * gini_counts(&right, nr))
                    / n as f64;
                if best.as_ref().map_or(true, |b| weighted < b.child_impurity) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: t,
                        child_impurity: weighted,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let n = idx.len();
        let counts = self.counts(&idx);
        let impurity = gini_counts(&counts, n);
        if depth >= self.params.max_depth || impurity == 0.0 || n < 2 * self.params.min_leaf.max(1)
        {
            return self.leaf(&counts, n);
        }
        let Some(split) = self.best_split(&idx) else {
            return self.leaf(&counts, n);
        };
        let (li, ri): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.data.vectors[i][split.feature] < split.threshold);
        let at = self.nodes.len();
        // Placeholder, patched once both children exist.
        self.nodes.push(TreeNode::Leaf {
            class: 0,
            distribution: Vec::new(),
        });
        let left = self.grow(li, depth + 1);
        let right = self.grow(ri, depth + 1);
        self.nodes[at] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            impurity,
            child_impurity: split.child_impurity,
        };
        at
    }
}

pub fn dt_train(data: &LabeledDataset, params: &DtParams) -> Result<DecisionTree> {
    data.validate()?;
    let mut b = Builder {
        data,
        params,
        nodes: Vec::new(),
    };
    b.grow((0..data.len()).collect(), 0);
    Ok(DecisionTree {
        params: params.clone(),
        nodes: b.nodes,
    })
}
