use gbmo::data::BinnedMatrix;
use gbmo::split::{SplitMode, SplitParams};
use gbmo::tree::{grow_tree, Leaf, TreeConfig, TreeNode};
use gbmo::GradHessBuffer;
use proptest::prelude::*;

fn config(mode: SplitMode, k: usize, limit: usize) -> TreeConfig<f64> {
    TreeConfig {
        split: SplitParams { mode, lambda: 1.0, k, min_samples: 2 },
        max_depth: 6,
        max_leaves: 24,
        gain_threshold: 0.0,
        node_store_limit: limit,
    }
}

// Gradients are multiples of 1/8, so every histogram sum is exact whichever way it is built.
fn problem(n: usize, m: usize, d: usize, seed: &[f64]) -> (BinnedMatrix, GradHessBuffer<f64>) {
    let columns: Vec<Vec<usize>> = (0..m)
        .map(|f| (0..n).map(|i| ((seed[(i * 7 + f * 3) % seed.len()].abs() * 1000.0) as usize + i * f) % 16).collect())
        .collect();
    let binned = BinnedMatrix::from_columns(&columns, vec![16; m]).unwrap();
    let g: Vec<f64> = (0..n * d).map(|i| (seed[i % seed.len()] * 8.0).round() / 8.0 * (1.0 + (i % 5) as f64)).collect();
    let grads = GradHessBuffer::new(n, d, g, vec![1.0; n * d], None).unwrap();
    (binned, grads)
}

fn threshold(_: usize, b: usize) -> f64 {
    b as f64 + 0.5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn best_first_pops_the_frontier_maximum(
        seed in prop::collection::vec(-2.0f64..2.0, 8..40),
        n in 20usize..200,
        d in 1usize..4,
    ) {
        let (binned, grads) = problem(n, 3, d, &seed);
        let samples: Vec<usize> = (0..n).collect();
        let grown = grow_tree(&samples, &binned, &grads, &config(SplitMode::Dense, 0, 48), threshold).unwrap();
        for ((_, gain), frontier) in grown.log.expansions.iter().zip(&grown.log.frontier_max) {
            if let Some(f) = frontier {
                prop_assert!(gain >= f);
            }
        }
        prop_assert!(grown.tree.num_leaves() <= 24);
        prop_assert!(grown.tree.depth() <= 6);
        let covered: usize = grown.leaf_samples.iter().map(|(_, s)| s.len()).sum();
        prop_assert_eq!(covered, n);
    }

    #[test]
    fn small_node_store_grows_the_same_tree(
        seed in prop::collection::vec(-2.0f64..2.0, 8..40),
        n in 20usize..200,
        d in 1usize..4,
    ) {
        let (binned, grads) = problem(n, 3, d, &seed);
        let samples: Vec<usize> = (0..n).collect();
        let roomy = grow_tree(&samples, &binned, &grads, &config(SplitMode::Dense, 0, 48), threshold).unwrap();
        let tight = grow_tree(&samples, &binned, &grads, &config(SplitMode::Dense, 0, 1), threshold).unwrap();
        prop_assert_eq!(&roomy.tree, &tight.tree);
        prop_assert_eq!(&roomy.leaf_samples, &tight.leaf_samples);
    }

    #[test]
    fn subtraction_builds_the_smaller_child(
        seed in prop::collection::vec(-2.0f64..2.0, 8..40),
        n in 20usize..200,
    ) {
        let (binned, grads) = problem(n, 2, 2, &seed);
        let samples: Vec<usize> = (0..n).collect();
        let grown = grow_tree(&samples, &binned, &grads, &config(SplitMode::Dense, 0, 48), threshold).unwrap();
        for (built, parent) in grown.log.built_children {
            prop_assert!(2 * built <= parent);
        }
    }

    #[test]
    fn restricted_siblings_share_columns(
        seed in prop::collection::vec(-2.0f64..2.0, 8..40),
        n in 20usize..200,
        k in 1usize..3,
    ) {
        let (binned, grads) = problem(n, 3, 4, &seed);
        let samples: Vec<usize> = (0..n).collect();
        let grown = grow_tree(&samples, &binned, &grads, &config(SplitMode::Restricted, k, 48), threshold).unwrap();
        let nodes = grown.tree.nodes();
        let cols = |id: usize| match &nodes[id] {
            TreeNode::Leaf(Leaf::Sparse(p)) => Some(p.iter().map(|e| e.0).collect::<Vec<_>>()),
            _ => None,
        };
        for node in nodes {
            if let TreeNode::Split { left, right, .. } = node {
                if let (Some(a), Some(b)) = (cols(*left), cols(*right)) {
                    prop_assert_eq!(a.len(), k);
                    prop_assert_eq!(a, b);
                }
            }
        }
    }
}
