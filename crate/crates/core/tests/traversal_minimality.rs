//! Shortest-cross-path minimality checked by brute force over all leaf
//! pairs on randomized trees with up to 32 leaves.

use latentlab_core::tree::{fit_tree, shortest_cross_path, TreeNode};
use latentlab_core::{Rng, Tensor};

fn path_to(tree: &latentlab_core::tree::DecisionTree, target: usize) -> Vec<usize> {
    let mut path = vec![0usize];
    let mut node = 0;
    while node != target {
        match tree.nodes[node] {
            TreeNode::Leaf { .. } => unreachable!(),
            TreeNode::Internal { left, right, .. } => {
                node = if target >= right { right } else { left };
                path.push(node);
            }
        }
    }
    path
}

fn edges_between(tree: &latentlab_core::tree::DecisionTree, a: usize, b: usize) -> usize {
    let pa = path_to(tree, a);
    let pb = path_to(tree, b);
    let mut common = 0;
    while common < pa.len() && common < pb.len() && pa[common] == pb[common] {
        common += 1;
    }
    pa.len() + pb.len() - 2 * common
}

#[test]
fn shortest_cross_path_is_minimal_by_enumeration() {
    for seed in 0..10u64 {
        let mut rng = Rng::from_seed(seed);
        // Random labelled data in 4 dimensions drives trees of varied shape.
        let n = 120;
        let xs: Vec<Tensor> = (0..n).map(|_| Tensor::randn(&[4], &mut rng)).collect();
        let ys: Vec<usize> = xs
            .iter()
            .map(|x| usize::from(x.data()[0] + 0.3 * x.data()[1] > 0.0))
            .collect();
        if !ys.contains(&0) || !ys.contains(&1) {
            continue;
        }
        let tree = fit_tree(&xs, &ys, 5, 2).unwrap();
        let leaves = tree.class_leaves(0).len() + tree.class_leaves(1).len();
        assert!(leaves <= 32, "tree grew past the enumeration budget");

        let path = shortest_cross_path(&tree, 0, 1).unwrap();
        let chosen = edges_between(&tree, path.from_leaf, path.to_leaf);
        for &f in &tree.class_leaves(0) {
            for &t in &tree.class_leaves(1) {
                assert!(
                    chosen <= edges_between(&tree, f, t),
                    "seed {seed}: pair ({f},{t}) shorter than the chosen path"
                );
            }
        }
    }
}
