mod common;

use common::*;
use insense::matrix::{condition_number, frame_potential, mu_avg, mu_max};
use insense::SensingMatrix;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn matrix_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (2usize..8, 2usize..7).prop_flat_map(|(d, n)| {
        (Just(d), Just(n), proptest::collection::vec(-3.0f64..3.0, d * n))
    })
}

fn build(d: usize, n: usize, data: &[f64]) -> SensingMatrix {
    SensingMatrix::new(DMatrix::from_row_slice(d, n, data)).unwrap()
}

fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

proptest! {
    #[test]
    fn mu_avg_matches_pairwise_loops((d, n, data) in matrix_strategy()) {
        let m = build(d, n, &data);
        let rows: Vec<Vec<f64>> = (0..d).map(|r| m.row_vec(r)).collect();
        if !m.has_zero_column() {
            prop_assert!(close(mu_avg(&m), mu_avg_loop(&rows), 1e-12));
        }
        prop_assert!((frame_potential(&m) - fp_loop(&rows)).abs() <= 1e-9 * (1.0 + fp_loop(&rows)));
    }

    #[test]
    fn column_scaling_invariance((d, n, data) in matrix_strategy(), scales in proptest::collection::vec(0.1f64..5.0, 7)) {
        let m = build(d, n, &data);
        let scaled = SensingMatrix::new(DMatrix::from_fn(d, n, |r, c| m.get(r, c) * scales[c])).unwrap();
        prop_assert!(close(mu_avg(&m), mu_avg(&scaled), 1e-10));
        prop_assert!(close(mu_max(&m), mu_max(&scaled), 1e-10));
    }

    #[test]
    fn row_permutation_and_sign_invariance((d, n, data) in matrix_strategy(), seed in 0u64..1000) {
        let m = build(d, n, &data);
        let mut r = rng(seed);
        let mut perm: Vec<usize> = (0..d).collect();
        for i in (1..d).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let signs: Vec<f64> = (0..d).map(|_| if r.random_bool(0.5) { -1.0 } else { 1.0 }).collect();
        let moved = SensingMatrix::new(DMatrix::from_fn(d, n, |row, c| signs[row] * m.get(perm[row], c))).unwrap();
        prop_assert!(close(mu_avg(&m), mu_avg(&moved), 1e-10));
        prop_assert!(close(mu_max(&m), mu_max(&moved), 1e-10));
        prop_assert!((frame_potential(&m) - frame_potential(&moved)).abs() <= 1e-9 * (1.0 + frame_potential(&m)));
    }

    #[test]
    fn left_orthogonal_transform_keeps_coherence((d, n, data) in matrix_strategy(), seed in 0u64..1000) {
        // Q Phi keeps every column inner product.
        let m = build(d, n, &data);
        let mut r = rng(seed);
        let g = DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0));
        let q = g.qr().q();
        let rotated = SensingMatrix::new(&q * m.as_matrix()).unwrap();
        if !m.has_zero_column() {
            prop_assert!(close(mu_avg(&m), mu_avg(&rotated), 1e-9));
        }
        prop_assert!(close(condition_number(&m), condition_number(&rotated), 1e-6 * condition_number(&m).unwrap_or(1.0)));
    }
}

#[test]
fn orthonormal_rows_have_unit_condition_number() {
    let m = SensingMatrix::identity(5).unwrap();
    assert!((condition_number(&m).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(frame_potential(&m), 0.0);
    assert_eq!(mu_avg(&m), Some(0.0));
}

#[test]
fn zero_column_is_undefined() {
    let m = SensingMatrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![3.0, 0.0, 1.0]]).unwrap();
    assert_eq!(mu_avg(&m), None);
    assert_eq!(mu_max(&m), None);
    assert!(condition_number(&m).is_some());
}
