use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stress_core::explain::{brute_force_shapley, shap_matrix, tree_shap_single};
use stress_core::models::tree::{Split, Tree, TreeNode};
use stress_core::models::{default_spec, train, Design, Family, ParamValue};

/// A random tree over `d` features with consistent covers: every split
/// divides its parent's cover between two non-empty children.
fn random_tree(rng: &mut ChaCha8Rng, d: usize, max_depth: usize) -> Tree {
    fn grow(rng: &mut ChaCha8Rng, nodes: &mut Vec<TreeNode>, d: usize, depth: usize, cover: f64) -> usize {
        let id = nodes.len();
        nodes.push(TreeNode::leaf(rng.random_range(-3.0..3.0), cover));
        if depth > 0 && cover >= 2.0 && rng.random::<f64>() < 0.8 {
            let left_cover = (cover * rng.random_range(0.1..0.9)).round().clamp(1.0, cover - 1.0);
            let feature = rng.random_range(0..d);
            let threshold = rng.random_range(-1.0..1.0);
            let left = grow(rng, nodes, d, depth - 1, left_cover);
            let right = grow(rng, nodes, d, depth - 1, cover - left_cover);
            nodes[id].split = Some(Split { feature, threshold, left, right });
        }
        id
    }
    let mut nodes = Vec::new();
    let cover = rng.random_range(20..200) as f64;
    grow(rng, &mut nodes, d, max_depth, cover);
    Tree { nodes }
}

fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.5..1.5)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tree_shap_equals_exhaustive_shapley(seed in any::<u64>(), d in 1usize..=4, depth in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, d, depth);
        for _ in 0..5 {
            let x = random_point(&mut rng, d);
            let fast = tree_shap_single(&tree, &x, d);
            let exact = brute_force_shapley(&tree, &x, d).unwrap();
            for (a, b) in fast.iter().zip(&exact) {
                prop_assert!((a - b).abs() < 1e-9, "{fast:?} vs {exact:?}");
            }
            let total: f64 = fast.iter().sum();
            prop_assert!((tree.expected_value() + total - tree.predict(&x)).abs() < 1e-9);
        }
    }

    #[test]
    fn unused_features_get_zero_attribution(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Trees only split on features 0 and 1 of a 4-feature input.
        let tree = random_tree(&mut rng, 2, 3);
        let x = random_point(&mut rng, 4);
        let phi = tree_shap_single(&tree, &x, 4);
        prop_assert_eq!(phi[2], 0.0);
        prop_assert_eq!(phi[3], 0.0);
    }
}

#[test]
fn interchangeable_features_share_credit_on_symmetric_inputs() {
    // f = 1 iff x0 > 0 and x1 > 0, with an even split of cover at every
    // node, so the two features play identical roles.
    let leaf = |v: f64| TreeNode::leaf(v, 25.0);
    let tree = Tree {
        nodes: vec![
            TreeNode { split: Some(Split { feature: 0, threshold: 0.0, left: 1, right: 4 }), value: 0.25, cover: 100.0 },
            TreeNode { split: Some(Split { feature: 1, threshold: 0.0, left: 2, right: 3 }), value: 0.0, cover: 50.0 },
            leaf(0.0),
            leaf(0.0),
            TreeNode { split: Some(Split { feature: 1, threshold: 0.0, left: 5, right: 6 }), value: 0.5, cover: 50.0 },
            leaf(0.0),
            leaf(1.0),
        ],
    };
    for v in [-1.0, 1.0] {
        let phi = tree_shap_single(&tree, &[v, v, 7.0], 3);
        assert!((phi[0] - phi[1]).abs() < 1e-12, "{phi:?}");
        assert_eq!(phi[2], 0.0);
    }
    let phi = tree_shap_single(&tree, &[1.0, 1.0, 0.0], 3);
    assert!((phi[0] - 0.375).abs() < 1e-12, "{phi:?}");
}

#[test]
fn trained_ensembles_are_locally_accurate() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let rows: Vec<Vec<f64>> = (0..300).map(|_| random_point(&mut rng, 10)).collect();
    let labels: Vec<bool> = rows.iter().map(|r| r[3] * r[8] > 0.1 || r[2] < -1.0).collect();
    let data = Design::new(rows, labels);
    let probes: Vec<Vec<f64>> = (0..1000).map(|_| random_point(&mut rng, 10)).collect();
    for (family, spec) in [
        (Family::Gbt, default_spec(Family::Gbt, 1)),
        (Family::RandomForest, default_spec(Family::RandomForest, 1).with("n_trees", ParamValue::Int(40))),
    ] {
        let model = train(&spec, &data).unwrap();
        let shap = shap_matrix(&model, &probes).unwrap();
        for (row, x) in shap.iter().zip(&probes) {
            let gap = (row.reconstructed_margin() - model.margin(x)).abs();
            assert!(gap < 1e-9, "{family}: gap {gap}");
        }
    }
}

#[test]
fn non_tree_models_are_refused() {
    let data = Design::new(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]], vec![false, false, true, true]);
    let model = train(&default_spec(Family::Knn, 0).with("k", ParamValue::Int(1)), &data).unwrap();
    assert!(shap_matrix(&model, &data.rows).is_err());
}
