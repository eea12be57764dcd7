//! Binary decision trees shared by gradient boosting and the random forest.
//!
//! Nodes live in a flat vector with the root at index 0. A row goes left when
//! `x[feature] <= threshold`. Every node records its training cover (summed
//! row weight), which the explainer uses to marginalize absent features.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    /// Leaf output; for internal nodes the weighted mean training target.
    pub value: f64,
    pub cover: f64,
}

impl TreeNode {
    pub fn leaf(value: f64, cover: f64) -> Self {
        TreeNode { split: None, value, cover }
    }

    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        while let Some(s) = self.nodes[i].split {
            i = if x[s.feature] <= s.threshold { s.left } else { s.right };
        }
        i
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.nodes[self.leaf_index(x)].value
    }

    /// Cover-weighted mean leaf value: the tree's output when no feature is known.
    pub fn expected_value(&self) -> f64 {
        fn walk(t: &Tree, i: usize) -> f64 {
            let n = &t.nodes[i];
            match n.split {
                None => n.value,
                Some(s) => {
                    let (l, r) = (&t.nodes[s.left], &t.nodes[s.right]);
                    (l.cover * walk(t, s.left) + r.cover * walk(t, s.right)) / n.cover
                }
            }
        }
        walk(self, 0)
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match t.nodes[i].split {
                None => 0,
                Some(s) => 1 + walk(t, s.left).max(walk(t, s.right)),
            }
        }
        walk(self, 0)
    }

    /// Sorted, deduplicated feature indices used by any split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self.nodes.iter().filter_map(|n| n.split.map(|s| s.feature)).collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    /// Check structural invariants: children in range and cover additivity.
    pub fn validate(&self) -> Result<(), String> {
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(s) = n.split {
                if s.left >= self.nodes.len() || s.right >= self.nodes.len() {
                    return Err(format!("node {i} has a child out of range"));
                }
                let sum = self.nodes[s.left].cover + self.nodes[s.right].cover;
                if (sum - n.cover).abs() > 1e-9 * n.cover.max(1.0) {
                    return Err(format!("node {i} cover {} != children {}", n.cover, sum));
                }
            }
        }
        Ok(())
    }
}

/// Split quality measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Weighted squared-error reduction.
    Mse,
    /// `w_L w_R / (w_L + w_R) * (mean_L - mean_R)^2`.
    FriedmanMse,
    /// Weighted Gini decrease on 0/1 targets.
    Gini,
}

#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    w: f64,
    s: f64,
    ss: f64,
}

impl Stats {
    fn add(&mut self, w: f64, y: f64) {
        self.w += w;
        self.s += w * y;
        self.ss += w * y * y;
    }

    fn minus(&self, o: &Stats) -> Stats {
        Stats { w: self.w - o.w, s: self.s - o.s, ss: self.ss - o.ss }
    }

    fn mean(&self) -> f64 {
        self.s / self.w
    }

    /// Sum of squared deviations, or Gini impurity times weight (0/1 targets).
    fn impurity(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Gini => 2.0 * self.s * (self.w - self.s) / self.w,
            _ => (self.ss - self.s * self.s / self.w).max(0.0),
        }
    }
}

fn gain(c: Criterion, parent: &Stats, left: &Stats, right: &Stats) -> f64 {
    match c {
        Criterion::FriedmanMse => {
            let d = left.mean() - right.mean();
            left.w * right.w / (left.w + right.w) * d * d
        }
        _ => parent.impurity(c) - left.impurity(c) - right.impurity(c),
    }
}

/// Growth limits and per-node feature sampling.
#[derive(Debug, Clone, Copy)]
pub struct GrowConfig {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_samples_split: f64,
    /// Candidate features drawn per node; `None` means all.
    pub features_per_split: Option<usize>,
}

/// Result of growing a tree: the tree and, per input entry, the leaf it reached.
pub struct Grown {
    pub tree: Tree,
    pub leaf_of: Vec<usize>,
}

const MIN_GAIN: f64 = 1e-12;

/// Grow a CART tree on `(row index, weight)` entries against `targets`.
///
/// Leaf values are the weighted mean target; callers may overwrite them.
pub fn grow<R: Rng>(
    x: &[Vec<f64>],
    targets: &[f64],
    entries: &[(usize, f64)],
    config: &GrowConfig,
    rng: &mut R,
) -> Grown {
    let n_features = x.first().map_or(0, |r| r.len());
    let mut tree = Tree { nodes: Vec::new() };
    let mut leaf_of = vec![0; entries.len()];
    // positions into `entries`
    let mut order: Vec<usize> = (0..entries.len()).collect();
    let mut stack = vec![(0usize, entries.len(), 0usize, usize::MAX)];
    // (lo, hi, depth, parent slot)
    while let Some((lo, hi, depth, parent)) = stack.pop() {
        let members = &order[lo..hi];
        let mut st = Stats::default();
        for &m in members {
            let (row, w) = entries[m];
            st.add(w, targets[row]);
        }
        let id = tree.nodes.len();
        tree.nodes.push(TreeNode::leaf(st.mean(), st.w));
        if parent != usize::MAX {
            let (p, is_left) = (parent >> 1, parent & 1 == 1);
            if let Some(s) = tree.nodes[p].split.as_mut() {
                if is_left {
                    s.left = id;
                } else {
                    s.right = id;
                }
            }
        }

        let can_split = config.max_depth.is_none_or(|d| depth < d)
            && st.w >= config.min_samples_split
            && st.impurity(config.criterion) > 0.0;
        let best = if can_split {
            let candidates: Vec<usize> = match config.features_per_split {
                Some(k) if k < n_features => {
                    let mut c = sample(rng, n_features, k).into_vec();
                    c.sort_unstable();
                    c
                }
                _ => (0..n_features).collect(),
            };
            best_split(x, targets, entries, &order[lo..hi], &st, &candidates, config.criterion)
        } else {
            None
        };

        match best {
            None => {
                for &m in &order[lo..hi] {
                    leaf_of[m] = id;
                }
            }
            Some((feature, threshold)) => {
                tree.nodes[id].split = Some(Split { feature, threshold, left: 0, right: 0 });
                // stable partition keeps sub-orders deterministic
                let (left, right): (Vec<usize>, Vec<usize>) = order[lo..hi]
                    .iter()
                    .partition(|&&m| x[entries[m].0][feature] <= threshold);
                let mid = lo + left.len();
                order[lo..mid].copy_from_slice(&left);
                order[mid..hi].copy_from_slice(&right);
                // push right first so the left subtree is numbered first
                stack.push((mid, hi, depth + 1, id << 1));
                stack.push((lo, mid, depth + 1, (id << 1) | 1));
            }
        }
    }
    Grown { tree, leaf_of }
}

fn best_split(
    x: &[Vec<f64>],
    targets: &[f64],
    entries: &[(usize, f64)],
    members: &[usize],
    parent: &Stats,
    candidates: &[usize],
    criterion: Criterion,
) -> Option<(usize, f64)> {
    let mut best: Option<(f64, usize, f64)> = None;
    let mut sorted = members.to_vec();
    for &f in candidates {
        sorted.sort_by(|&a, &b| x[entries[a].0][f].total_cmp(&x[entries[b].0][f]));
        let mut left = Stats::default();
        for k in 0..sorted.len() - 1 {
            let (row, w) = entries[sorted[k]];
            left.add(w, targets[row]);
            let lo = x[row][f];
            let hi = x[entries[sorted[k + 1]].0][f];
            if lo >= hi {
                continue;
            }
            let right = parent.minus(&left);
            let g = gain(criterion, parent, &left, &right);
            if g > MIN_GAIN && best.is_none_or(|b| g > b.0) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some((g, f, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}
