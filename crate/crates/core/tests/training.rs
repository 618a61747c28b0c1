use gbmo::{
    evaluate_metric, train, write_model, BoostMode, BoosterConfig64, Dataset64, Leaf, LossKind, Matrix, Metric,
    SynthKind, TreeNode, TreeTarget,
};
use proptest::prelude::*;

fn friedman(n: usize, seed: u64) -> Dataset64 {
    SynthKind::Friedman1.generate(n, seed).unwrap()
}

fn split(ds: &Dataset64, at: usize) -> (Dataset64, Dataset64) {
    let a: Vec<usize> = (0..at).collect();
    let b: Vec<usize> = (at..ds.num_samples()).collect();
    let take = |i: &[usize]| Dataset64::new(ds.features().select_rows(i), ds.targets().select_rows(i)).unwrap();
    (take(&a), take(&b))
}

#[test]
fn fixed_seed_is_deterministic_across_worker_counts() {
    let ds = friedman(600, 3);
    let model = |workers| {
        let cfg = BoosterConfig64 { workers: Some(workers), max_rounds: 25, ..BoosterConfig64::default() };
        write_model(&train(&ds, None, &cfg).unwrap().ensemble)
    };
    let one = model(1);
    assert_eq!(one, model(1));
    assert_eq!(one, model(3));
}

#[test]
fn sparse_with_every_column_equals_dense() {
    let ds = friedman(500, 5);
    let run = |mode, k| {
        let cfg = BoosterConfig64 { mode, sparse_k: k, max_rounds: 20, ..BoosterConfig64::default() };
        write_model(&train(&ds, None, &cfg).unwrap().ensemble)
    };
    let dense = run(BoostMode::MoDense, None);
    assert_eq!(dense, run(BoostMode::MoSparse, Some(5)));
    assert_eq!(dense, run(BoostMode::MoRestricted, Some(5)));
}

#[test]
fn single_output_baseline_matches_dense_for_one_output() {
    let ds = friedman(500, 6);
    let one = Dataset64::new(ds.features().clone(), ds.targets().select_columns(&[2])).unwrap();
    let run = |mode| {
        let cfg = BoosterConfig64 { mode, max_rounds: 20, ..BoosterConfig64::default() };
        write_model(&train(&one, None, &cfg).unwrap().ensemble)
    };
    assert_eq!(run(BoostMode::MoDense), run(BoostMode::SoBaseline));
}

#[test]
fn baseline_grows_one_tree_per_output_per_round() {
    let ds = friedman(300, 7);
    let cfg = BoosterConfig64 {
        mode: BoostMode::SoBaseline,
        max_rounds: 6,
        early_stop_patience: None,
        ..BoosterConfig64::default()
    };
    let fit = train(&ds, None, &cfg).unwrap();
    assert_eq!(fit.ensemble.num_trees(), 6 * 5);
    for (i, (target, _)) in fit.ensemble.trees().iter().enumerate() {
        assert_eq!(*target, TreeTarget::Output(i % 5));
    }
}

#[test]
fn truncated_ensemble_reproduces_the_best_eval_metric() {
    let (tr, ev) = split(&friedman(1200, 8), 600);
    let cfg = BoosterConfig64 { learning_rate: 0.5, max_rounds: 300, early_stop_patience: Some(5), ..BoosterConfig64::default() };
    let fit = train(&tr, Some(&ev), &cfg).unwrap();
    assert!(fit.history.len() <= 300);
    assert_eq!(fit.history.len(), fit.best_round + 5);
    assert_eq!(fit.ensemble.num_trees(), fit.best_round);
    let pred = fit.ensemble.predict_raw(ev.features()).unwrap();
    let again = evaluate_metric(Metric::Rmse, &pred, ev.targets()).unwrap();
    assert_eq!(Some(again), fit.best_value);
    assert_eq!(fit.history[fit.best_round - 1].eval_metric, fit.best_value);
}

#[test]
fn sparse_leaves_store_at_most_k_columns() {
    let ds = friedman(400, 9);
    for mode in [BoostMode::MoSparse, BoostMode::MoRestricted] {
        let cfg = BoosterConfig64 { mode, sparse_k: Some(2), max_rounds: 10, ..BoosterConfig64::default() };
        let fit = train(&ds, None, &cfg).unwrap();
        for (_, tree) in fit.ensemble.trees() {
            for node in tree.nodes() {
                if let TreeNode::Leaf(leaf) = node {
                    assert!(matches!(leaf, Leaf::Sparse(p) if p.len() == 2));
                }
            }
        }
    }
}

fn blobs() -> Dataset64 {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..90 {
        let class = i % 3;
        let jitter = (i / 3) as f64 * 0.01;
        x.extend([class as f64 * 2.0 + jitter, 1.0 - jitter]);
        y.extend((0..3).map(|c| if c == class { 1.0 } else { 0.0 }));
    }
    Dataset64::new(Matrix::from_vec(90, 2, x).unwrap(), Matrix::from_vec(90, 3, y).unwrap()).unwrap()
}

#[test]
fn softmax_separates_blobs_in_every_mode() {
    let ds = blobs();
    for (mode, k) in [
        (BoostMode::MoDense, None),
        (BoostMode::MoSparse, Some(1)),
        (BoostMode::MoRestricted, Some(2)),
        (BoostMode::MoExact, None),
        (BoostMode::SoBaseline, None),
    ] {
        let cfg = BoosterConfig64 {
            loss: LossKind::SoftmaxCe,
            mode,
            sparse_k: k,
            learning_rate: 0.5,
            min_samples: 2,
            max_rounds: 30,
            ..BoosterConfig64::default()
        };
        let fit = train(&ds, None, &cfg).unwrap();
        let pred = fit.ensemble.predict_raw(ds.features()).unwrap();
        let acc = evaluate_metric(Metric::Top1Accuracy, &pred, ds.targets()).unwrap();
        assert_eq!(acc, 1.0, "{mode}");
        let probs = fit.ensemble.predict(ds.features(), true).unwrap();
        for row in probs.iter_rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(fit.history.last().unwrap().train_loss < fit.history[0].train_loss);
    }
}

#[test]
fn learned_model_beats_the_constant_predictor() {
    let (tr, te) = split(&friedman(2000, 10), 1000);
    let cfg = BoosterConfig64 { max_rounds: 200, ..BoosterConfig64::default() };
    let fit = train(&tr, Some(&te), &cfg).unwrap();
    let zero = Matrix::filled(te.num_samples(), 5, 0.0);
    let base = evaluate_metric(Metric::Rmse, &zero, te.targets()).unwrap();
    assert!(fit.best_value.unwrap() < 0.5 * base);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mse_training_loss_never_increases(
        n in 8usize..80,
        seed in 0u64..1000,
        lr in 0.05f64..1.0,
        lambda in 0.0f64..3.0,
        mode_ix in 0usize..5,
    ) {
        let ds = friedman(n, seed);
        let (mode, k) = [
            (BoostMode::MoDense, None),
            (BoostMode::MoSparse, Some(2)),
            (BoostMode::MoRestricted, Some(3)),
            (BoostMode::MoExact, None),
            (BoostMode::SoBaseline, None),
        ][mode_ix];
        let cfg = BoosterConfig64 {
            mode,
            sparse_k: k,
            learning_rate: lr,
            lambda,
            min_samples: 1,
            max_rounds: 15,
            early_stop_patience: None,
            ..BoosterConfig64::default()
        };
        let fit = train(&ds, None, &cfg).unwrap();
        let zero = Matrix::filled(n, 5, 0.0);
        let mut prev = LossKind::Mse.mean_loss(&zero, ds.targets()).unwrap();
        for r in &fit.history {
            prop_assert!(r.train_loss <= prev + 1e-12, "{} > {}", r.train_loss, prev);
            prev = r.train_loss;
        }
    }

    #[test]
    fn predictions_are_base_plus_scaled_leaf_sums(n in 10usize..60, seed in 0u64..500) {
        let ds = friedman(n, seed);
        let cfg = BoosterConfig64 { max_rounds: 5, learning_rate: 0.3, min_samples: 1, ..BoosterConfig64::default() };
        let model = train(&ds, None, &cfg).unwrap().ensemble;
        let pred = model.predict_raw(ds.features()).unwrap();
        for i in 0..n {
            let row = ds.features().row(i);
            let mut expect = model.base_score().to_vec();
            for (_, tree) in model.trees() {
                for (e, w) in expect.iter_mut().zip(tree.predict_row(row)) {
                    *e += 0.3 * w;
                }
            }
            prop_assert_eq!(pred.row(i), &expect[..]);
        }
    }
}
