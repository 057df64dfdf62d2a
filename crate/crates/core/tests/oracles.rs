mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use typofill::mlcore::forest::{Forest, ForestParams};
use typofill::mlcore::tree::{grow_tree, Criterion, SortedColumns, TreeParams};
use typofill::mlcore::{f1_score, fit, fit_pca, Dataset, Hyperparams, Matrix};
use typofill::seed::{self, stream};

#[test]
fn gini_split_matches_exhaustive_search() {
    oracle::gini_split_suite().unwrap();
}

#[test]
fn logistic_gradient_matches_central_differences() {
    oracle::logistic_gradient_suite().unwrap();
}

#[test]
fn pca_matches_jacobi_oracle() {
    oracle::pca_suite().unwrap();
}

#[test]
fn f1_hand_cases() {
    oracle::f1_suite().unwrap();
}

#[test]
fn jacobi_oracle_on_known_matrix() {
    let (vals, vecs) = oracle::jacobi_eigen(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
    assert!((vals[0] - 3.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
    assert!((vecs[0][0].abs() - 0.5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn pca_axis_aligned_points() {
    let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![4.0, 0.0]]).unwrap();
    let m = fit_pca(&x, 1).unwrap();
    assert_eq!(m.components.row(0), &[1.0, 0.0]);
    assert!((m.explained_variance[0] - 4.0).abs() < 1e-12);
}

#[test]
fn constant_columns_do_not_change_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let core: Vec<Vec<f64>> = (0..7).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let padded: Vec<Vec<f64>> = core
        .iter()
        .map(|r| {
            let mut v = vec![3.0];
            v.extend(r);
            v.extend([0.0, -1.0]);
            v
        })
        .collect();
    let a = fit_pca(&Matrix::from_rows(&core).unwrap(), 3).unwrap();
    let b = fit_pca(&Matrix::from_rows(&padded).unwrap(), 3).unwrap();
    for i in 0..3 {
        let row = b.components.row(i);
        assert_eq!([row[0], row[5], row[6]], [0.0, 0.0, 0.0]);
        for j in 0..4 {
            assert!((row[j + 1] - a.components.get(i, j)).abs() < 1e-12);
        }
        assert!((a.explained_variance[i] - b.explained_variance[i]).abs() < 1e-12);
    }
    for (r, p) in core.iter().zip(&padded) {
        let (za, zb) = (a.transform(r), b.transform(p));
        for (u, v) in za.iter().zip(&zb) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}

fn xor_data() -> (Matrix, Vec<f64>) {
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 2) as f64, (i / 2 % 2) as f64, (i % 7) as f64]).collect();
    let y = rows.iter().map(|r| f64::from(u8::from(r[0] != r[1]))).collect();
    (Matrix::from_rows(&rows).unwrap(), y)
}

#[test]
fn forest_replays_from_per_tree_seeds() {
    let (x, y) = xor_data();
    let params = ForestParams {
        n_estimators: 25,
        max_depth: Some(4),
        min_samples_split: 2,
        max_features: Some(2),
        bootstrap: true,
        criterion: Criterion::Gini,
    };
    let master = 77;
    let forest = Forest::fit(&x, &y, &params, master);
    let sorted = SortedColumns::new(&x);
    let tree_params = TreeParams {
        criterion: Criterion::Gini,
        max_depth: Some(4),
        min_samples_split: 2,
        max_features: Some(2),
    };
    let n = x.rows();
    let replayed: Vec<_> = (0..25)
        .map(|t| {
            let mut rng = seed::rng(seed::child(master, stream::TREE, t));
            let mut w = vec![0.0; n];
            for _ in 0..n {
                w[rng.gen_range(0..n)] += 1.0;
            }
            grow_tree(&x, &y, &w, &sorted, &tree_params, Some(&mut rng)).tree
        })
        .collect();
    assert_eq!(forest.trees(), replayed.as_slice());
    let mut correct = 0;
    for i in 0..n {
        let votes = replayed.iter().filter(|t| t.predict(x.row(i)) >= 0.5).count();
        let majority = votes * 2 >= replayed.len();
        assert_eq!(forest.predict(x.row(i)) >= 0.5, majority, "row {i}");
        correct += usize::from(majority == (y[i] == 1.0));
    }
    assert_eq!(correct, n);
}

#[test]
fn forest_is_thread_count_invariant() {
    let (x, y) = xor_data();
    let params = ForestParams {
        n_estimators: 40,
        max_depth: None,
        min_samples_split: 2,
        max_features: Some(1),
        bootstrap: true,
        criterion: Criterion::Gini,
    };
    let fit_with = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| Forest::fit(&x, &y, &params, 5))
    };
    assert_eq!(fit_with(1), fit_with(4));
}

#[test]
fn unbounded_tree_reproduces_unique_training_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64, rng.gen_range(0.0..1.0)]).collect();
    let y: Vec<u8> = (0..60).map(|_| rng.gen_range(0..2)).collect();
    let data = Dataset::new(Matrix::from_rows(&rows).unwrap(), y.clone(), Vec::new()).unwrap();
    let hp = Hyperparams::DecisionTree {
        max_depth: None,
        min_samples_split: 2,
    };
    let model = fit(&hp, &data, 0).unwrap();
    let pred = model.predict(&data.x).unwrap();
    assert_eq!(f1_score(&pred, &y).unwrap(), 100.0);
}
