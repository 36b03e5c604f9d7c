//! Guided latent traversal: fit an axis-aligned binary decision tree over
//! labelled latent vectors, extract the shortest cross-class leaf path, and
//! edit a seed vector dimension by dimension until it lands in the target
//! class region.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::tensor::Tensor;

pub const DEFAULT_MAX_DEPTH: usize = 6;
pub const DEFAULT_MIN_LEAF: usize = 5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TreeNode {
    Internal { dim: usize, threshold: f64, left: usize, right: usize },
    Leaf { class: usize, count: usize },
}

/// Fitted tree. Nodes are stored in preorder (root first, left subtree
/// before right), which the shortest-path tie rule relies on. The training
/// columns are retained so path edits can use on-manifold side means.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub dim: usize,
    train_columns: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Value must satisfy `x[dim] <= threshold`.
    Le,
    /// Value must satisfy `x[dim] > threshold`.
    Gt,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathEdit {
    pub dim: usize,
    pub threshold: f64,
    pub side: Side,
}

/// Ordered edits moving a vector from a source leaf region into a target
/// leaf region (decisions below the leaves' lowest common ancestor).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraversalPath {
    pub edits: Vec<PathEdit>,
    pub from_leaf: usize,
    pub to_leaf: usize,
}

fn entropy(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let mut h = 0.0;
    for c in counts {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.ln();
        }
    }
    h
}

/// Greedy entropy-minimizing CART fit over binary labels. Thresholds sit at
/// midpoints of adjacent sorted distinct values; gain ties break toward the
/// lower dimension, then the lower threshold.
pub fn fit_tree(
    x: &[Tensor],
    y: &[usize],
    max_depth: usize,
    min_leaf: usize,
) -> Result<DecisionTree> {
    if x.is_empty() {
        return Err(CoreError::EmptyInput("decision tree training set".into()));
    }
    if x.len() != y.len() {
        return Err(CoreError::ShapeMismatch(format!(
            "{} vectors vs {} labels",
            x.len(),
            y.len()
        )));
    }
    if let Some(&bad) = y.iter().find(|&&c| c > 1) {
        return Err(CoreError::InvalidArgument(format!(
            "labels must be binary 0/1, got {bad}"
        )));
    }
    let dim = x[0].len();
    if x.iter().any(|v| v.len() != dim) {
        return Err(CoreError::ShapeMismatch("training vectors differ in dimension".into()));
    }
    if !y.contains(&0) || !y.contains(&1) {
        return Err(CoreError::InvalidArgument(
            "both classes must be present in the training labels".into(),
        ));
    }

    let mut train_columns = vec![Vec::with_capacity(x.len()); dim];
    for v in x {
        for (d, col) in train_columns.iter_mut().enumerate() {
            col.push(v.data()[d]);
        }
    }

    let mut tree = DecisionTree { nodes: Vec::new(), dim, train_columns };
    let indices: Vec<usize> = (0..x.len()).collect();
    build_node(&mut tree, x, y, indices, 0, max_depth, min_leaf.max(1));
    Ok(tree)
}

fn majority(y: &[usize], indices: &[usize]) -> (usize, usize) {
    let ones = indices.iter().filter(|&&i| y[i] == 1).count();
    let zeros = indices.len() - ones;
    // Ties go to class 0.
    if ones > zeros {
        (1, indices.len())
    } else {
        (0, indices.len())
    }
}

fn build_node(
    tree: &mut DecisionTree,
    x: &[Tensor],
    y: &[usize],
    indices: Vec<usize>,
    depth: usize,
    max_depth: usize,
    min_leaf: usize,
) -> usize {
    let counts = [
        indices.iter().filter(|&&i| y[i] == 0).count(),
        indices.iter().filter(|&&i| y[i] == 1).count(),
    ];
    let pure = counts[0] == 0 || counts[1] == 0;
    let split = if pure || depth >= max_depth {
        None
    } else {
        best_split(tree.dim, x, y, &indices, min_leaf)
    };

    let node_index = tree.nodes.len();
    match split {
        None => {
            let (class, count) = majority(y, &indices);
            tree.nodes.push(TreeNode::Leaf { class, count });
            node_index
        }
        Some((dim, threshold)) => {
            tree.nodes.push(TreeNode::Internal { dim, threshold, left: 0, right: 0 });
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
                indices.into_iter().partition(|&i| x[i].data()[dim] <= threshold);
            let left = build_node(tree, x, y, left_idx, depth + 1, max_depth, min_leaf);
            let right = build_node(tree, x, y, right_idx, depth + 1, max_depth, min_leaf);
            if let TreeNode::Internal { left: l, right: r, .. } = &mut tree.nodes[node_index] {
                *l = left;
                *r = right;
            }
            node_index
        }
    }
}

fn best_split(
    dim: usize,
    x: &[Tensor],
    y: &[usize],
    indices: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let n = indices.len();
    let parent_counts = [
        indices.iter().filter(|&&i| y[i] == 0).count(),
        indices.iter().filter(|&&i| y[i] == 1).count(),
    ];
    let parent_entropy = entropy(parent_counts);
    let mut best: Option<(f64, usize, f64)> = None; // (gain, dim, threshold)

    for d in 0..dim {
        let mut values: Vec<(f64, usize)> =
            indices.iter().map(|&i| (x[i].data()[d], y[i])).collect();
        values.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

        let mut left_counts = [0usize; 2];
        for pos in 0..n - 1 {
            left_counts[values[pos].1] += 1;
            if values[pos].0 == values[pos + 1].0 {
                continue; // no boundary between equal values
            }
            let left_n = pos + 1;
            let right_n = n - left_n;
            if left_n < min_leaf || right_n < min_leaf {
                continue;
            }
            let right_counts = [
                parent_counts[0] - left_counts[0],
                parent_counts[1] - left_counts[1],
            ];
            let gain = parent_entropy
                - (left_n as f64 / n as f64) * entropy(left_counts)
                - (right_n as f64 / n as f64) * entropy(right_counts);
            let threshold = 0.5 * (values[pos].0 + values[pos + 1].0);
            // An impure node accepts any admissible split, even zero-gain
            // (a zero-gain first cut is what solves parity-style data).
            // Iteration order (dim ascending, threshold ascending) realizes
            // the tie rule: strict improvement required to displace.
            let better = match best {
                None => true,
                Some((bg, _, _)) => gain > bg + 1e-12,
            };
            if better {
                best = Some((gain, d, threshold));
            }
        }
    }
    best.map(|(_, d, t)| (d, t))
}

impl DecisionTree {
    pub fn predict(&self, x: &Tensor) -> Result<usize> {
        let leaf = self.leaf_index(x)?;
        match self.nodes[leaf] {
            TreeNode::Leaf { class, .. } => Ok(class),
            TreeNode::Internal { .. } => unreachable!("leaf_index returns leaves"),
        }
    }

    pub fn leaf_index(&self, x: &Tensor) -> Result<usize> {
        if x.len() != self.dim {
            return Err(CoreError::ShapeMismatch(format!(
                "vector dim {} vs tree dim {}",
                x.len(),
                self.dim
            )));
        }
        let mut node = 0;
        loop {
            match self.nodes[node] {
                TreeNode::Leaf { .. } => return Ok(node),
                TreeNode::Internal { dim, threshold, left, right } => {
                    node = if x.data()[dim] <= threshold { left } else { right };
                }
            }
        }
    }

    /// Leaf node indices carrying the given class, in preorder.
    pub fn class_leaves(&self, class: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n {
                TreeNode::Leaf { class: c, .. } if *c == class => Some(i),
                _ => None,
            })
            .collect()
    }

    /// Root-to-node index path.
    fn path_to(&self, target: usize) -> Vec<usize> {
        let mut path = vec![0usize];
        let mut node = 0;
        while node != target {
            match self.nodes[node] {
                TreeNode::Leaf { .. } => unreachable!("target must be reachable"),
                TreeNode::Internal { left, right, .. } => {
                    // Preorder layout: the right subtree starts at `right`;
                    // anything in between belongs to the left subtree.
                    node = if target >= right { right } else { left };
                    path.push(node);
                }
            }
        }
        path
    }

    /// Per-dimension admissible interval `(lo, hi]` of a leaf region.
    fn leaf_box(&self, leaf: usize) -> Vec<(f64, f64)> {
        let mut boxes = vec![(f64::NEG_INFINITY, f64::INFINITY); self.dim];
        let path = self.path_to(leaf);
        for w in path.windows(2) {
            if let TreeNode::Internal { dim, threshold, left, .. } = self.nodes[w[0]] {
                if w[1] == left {
                    boxes[dim].1 = boxes[dim].1.min(threshold);
                } else {
                    boxes[dim].0 = boxes[dim].0.max(threshold);
                }
            }
        }
        boxes
    }

    /// Depth of a node (root = 0).
    pub fn depth_of(&self, node: usize) -> usize {
        self.path_to(node).len() - 1
    }

    pub fn export_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn import_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

/// Among all (from-class leaf, to-class leaf) pairs, selects the pair with
/// the fewest tree edges between them (via the lowest common ancestor), ties
/// broken by leftmost (preorder) from-leaf then to-leaf. The edit list holds
/// the decisions from the LCA down to the target leaf.
pub fn shortest_cross_path(
    tree: &DecisionTree,
    from_class: usize,
    to_class: usize,
) -> Result<TraversalPath> {
    let from_leaves = tree.class_leaves(from_class);
    let to_leaves = tree.class_leaves(to_class);
    if from_leaves.is_empty() {
        return Err(CoreError::MissingLabel(format!("class {from_class} has no leaf")));
    }
    if to_leaves.is_empty() {
        return Err(CoreError::MissingLabel(format!("class {to_class} has no leaf")));
    }

    let mut best: Option<(usize, usize, usize)> = None; // (edges, from, to)
    for &f in &from_leaves {
        for &t in &to_leaves {
            let pf = tree.path_to(f);
            let pt = tree.path_to(t);
            let mut common = 0;
            while common < pf.len() && common < pt.len() && pf[common] == pt[common] {
                common += 1;
            }
            let edges = (pf.len() - common) + (pt.len() - common);
            let better = match best {
                None => true,
                Some((be, bf, bt)) => edges < be || (edges == be && (f, t) < (bf, bt)),
            };
            if better {
                best = Some((edges, f, t));
            }
        }
    }
    let (_, from_leaf, to_leaf) = best.expect("both leaf sets nonempty");

    let pf = tree.path_to(from_leaf);
    let pt = tree.path_to(to_leaf);
    let mut common = 0;
    while common < pf.len() && common < pt.len() && pf[common] == pt[common] {
        common += 1;
    }
    let mut edits = Vec::new();
    for w in pt[common - 1..].windows(2) {
        if let TreeNode::Internal { dim, threshold, left, .. } = tree.nodes[w[0]] {
            let side = if w[1] == left { Side::Le } else { Side::Gt };
            edits.push(PathEdit { dim, threshold, side });
        }
    }
    Ok(TraversalPath { edits, from_leaf, to_leaf })
}

/// Applies the traversal: every dimension whose value violates the target
/// leaf's region is set to the mean of the training values inside that
/// region's interval for the dimension (nudged off the binding threshold
/// when no training value lies inside). Satisfied dimensions are preserved
/// bit-identically, so an empty edit list returns the seed unchanged.
pub fn apply_path(tree: &DecisionTree, z: &Tensor, path: &TraversalPath) -> Result<Tensor> {
    if z.len() != tree.dim {
        return Err(CoreError::ShapeMismatch(format!(
            "vector dim {} vs tree dim {}",
            z.len(),
            tree.dim
        )));
    }
    let boxes = tree.leaf_box(path.to_leaf);
    let mut out = z.clone();
    for (d, &(lo, hi)) in boxes.iter().enumerate() {
        let v = out.data()[d];
        if v > lo && v <= hi {
            continue;
        }
        let inside: Vec<f64> = tree.train_columns[d]
            .iter()
            .copied()
            .filter(|&t| t > lo && t <= hi)
            .collect();
        let value = if inside.is_empty() {
            fallback_value(lo, hi)
        } else {
            inside.iter().sum::<f64>() / inside.len() as f64
        };
        out.data_mut()[d] = value;
    }
    Ok(out)
}

fn nudge(threshold: f64) -> f64 {
    if threshold == 0.0 {
        1e-3
    } else {
        1e-3 * threshold.abs()
    }
}

fn fallback_value(lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (false, true) => hi - nudge(hi),
        (true, false) => lo + nudge(lo),
        (false, false) => 0.0,
    }
}
