use lbse_core::learners::KnnRegressor;
use lbse_core::nalgebra::{DMatrix, DVector};
use lbse_core::{fit_linear, knn_predict};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-2.0..2.0))
}

fn with_ones(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut a = DMatrix::from_element(x.nrows(), x.ncols() + 1, 1.0);
    a.columns_mut(1, x.ncols()).copy_from(x);
    a
}

#[test]
fn coefficients_match_the_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let x = random_matrix(&mut rng, 50, 7);
    let y = random_matrix(&mut rng, 50, 3);
    let model = fit_linear(&x, &y).unwrap();
    let a = with_ones(&x);
    let beta = (a.transpose() * &a)
        .lu()
        .solve(&(a.transpose() * &y))
        .unwrap();
    for out in 0..3 {
        assert!((model.intercept[out] - beta[(0, out)]).abs() <= 1e-8);
        for f in 0..7 {
            assert!((model.weights[(out, f)] - beta[(f + 1, out)]).abs() <= 1e-8);
        }
    }
    assert_eq!(model.rank, 7);
}

#[test]
fn knn_matches_a_full_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let x = random_matrix(&mut rng, 300, 5);
    let y = random_matrix(&mut rng, 300, 4);
    for _ in 0..10 {
        let q = DVector::from_fn(5, |_, _| rng.random_range(-2.0..2.0));
        let mut order: Vec<(f64, usize)> = (0..300)
            .map(|i| ((x.row(i).transpose() - &q).norm_squared(), i))
            .collect();
        order.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = order[..20]
            .iter()
            .fold(DVector::zeros(4), |acc, &(_, i)| acc + y.row(i).transpose())
            / 20.0;
        let got = knn_predict(&x, &y, &q, 20).unwrap();
        assert!((got - expected).amax() <= 1e-12);
    }
}

#[test]
fn one_nn_returns_the_training_target_for_a_training_query() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_matrix(&mut rng, 40, 3);
    let y = random_matrix(&mut rng, 40, 2);
    let knn = KnnRegressor::new(&x, &y, false).unwrap();
    for i in 0..40 {
        let got = knn.predict(&x.row(i).transpose(), 1).unwrap();
        assert_eq!(got, y.row(i).transpose());
    }
}

#[test]
fn ties_go_to_the_earliest_training_row() {
    let x = DMatrix::from_row_slice(3, 1, &[1.0, -1.0, 1.0]);
    let y = DMatrix::from_row_slice(3, 1, &[10.0, 20.0, 30.0]);
    let knn = KnnRegressor::new(&x, &y, false).unwrap();
    assert_eq!(
        knn.neighbors(&DVector::from_element(1, 0.0), 1).unwrap(),
        vec![0]
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn training_residuals_have_zero_mean(seed in any::<u64>(), n in 20usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(&mut rng, n, 4);
        let y = random_matrix(&mut rng, n, 3).map(|v| 50.0 * v);
        let model = fit_linear(&x, &y).unwrap();
        prop_assert!(model.train_residual_mean.amax() <= 1e-9);
        prop_assert!(model.residual_sigma.iter().all(|s| *s > 0.0));
    }

    #[test]
    fn extra_features_never_raise_training_error(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let small = random_matrix(&mut rng, 60, 4);
        let extra = random_matrix(&mut rng, 60, 3);
        let y = random_matrix(&mut rng, 60, 2);
        let mut big = DMatrix::zeros(60, 7);
        big.columns_mut(0, 4).copy_from(&small);
        big.columns_mut(4, 3).copy_from(&extra);
        let (a, b) = (fit_linear(&small, &y).unwrap(), fit_linear(&big, &y).unwrap());
        for out in 0..2 {
            prop_assert!(b.train_mse[out] <= a.train_mse[out] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn prediction_is_affine_in_the_features(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(&mut rng, 30, 3);
        let y = random_matrix(&mut rng, 30, 2);
        let model = fit_linear(&x, &y).unwrap();
        let q = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let expected = &model.weights * &q + &model.intercept;
        prop_assert!((model.predict(&q).unwrap() - expected).amax() <= 1e-12);
    }
}
