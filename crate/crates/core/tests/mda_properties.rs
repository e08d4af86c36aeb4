//! Discriminant directions against random-direction and PCA baselines.

mod common;

use common::{rng, unit_vector};
use enprocell_core::projection::{fisher_ratio, fit_mda, fit_pca, scatter, DEFAULT_EPSILON_SCALE};
use enprocell_core::Matrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

/// Three Gaussian classes in `dim` dimensions with random centers and
/// random per-axis spreads.
fn three_classes(seed: u64, dim: usize) -> (Matrix, Vec<usize>) {
    let mut r = rng(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let spread: Vec<f64> = (0..dim).map(|_| r.random_range(0.5..2.0)).collect();
    for class in 0..3 {
        let center: Vec<f64> = (0..dim).map(|_| r.random_range(-4.0..4.0)).collect();
        let count = r.random_range(10..30);
        for _ in 0..count {
            rows.push(
                (0..dim)
                    .map(|g| center[g] + spread[g] * r.sample::<f64, _>(StandardNormal))
                    .collect::<Vec<_>>(),
            );
            labels.push(class);
        }
    }
    (Matrix::from_rows(&rows).unwrap(), labels)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn first_direction_dominates_random_and_pca(seed in any::<u64>(), dim in 3usize..=5) {
        let (data, labels) = three_classes(seed, dim);
        let mda = fit_mda(&data, &labels, DEFAULT_EPSILON_SCALE).unwrap();
        let sc = scatter(&data, &labels).unwrap();
        let best = fisher_ratio(&sc, &mda.components.column(0));
        let slack = 1.0 - 1e-6;
        let mut r = rng(seed ^ 1);
        for _ in 0..1000 {
            let v = unit_vector(&mut r, dim);
            prop_assert!(best >= slack * fisher_ratio(&sc, &v));
        }
        let pca = fit_pca(&data, dim).unwrap();
        for c in 0..dim {
            prop_assert!(best >= slack * fisher_ratio(&sc, &pca.components.column(c)));
        }
        // rank(S_b) ≤ k − 1
        prop_assert_eq!(mda.n_components(), 3);
        prop_assert!(mda.eigenvalues[2] <= 1e-6 * mda.eigenvalues[0]);
        for w in mda.eigenvalues.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn doubling_epsilon_barely_moves_the_leading_direction(seed in any::<u64>()) {
        let (data, labels) = three_classes(seed, 4);
        let a = fit_mda(&data, &labels, DEFAULT_EPSILON_SCALE).unwrap();
        let b = fit_mda(&data, &labels, 2.0 * DEFAULT_EPSILON_SCALE).unwrap();
        prop_assert!((b.regularization - 2.0 * a.regularization).abs() <= 1e-12 * b.regularization);
        let va = a.components.column(0);
        let vb = b.components.column(0);
        let cos: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum::<f64>().abs().min(1.0);
        prop_assert!(cos.acos() < 1e-3);
    }
}

#[test]
fn two_dimensional_three_class_example() {
    let (data, labels) = three_classes(99, 2);
    let mda = fit_mda(&data, &labels, DEFAULT_EPSILON_SCALE).unwrap();
    // only two directions exist in the plane
    assert_eq!(mda.n_components(), 2);
    let sc = scatter(&data, &labels).unwrap();
    let best = fisher_ratio(&sc, &mda.components.column(0));
    let mut r = rng(5);
    for _ in 0..1000 {
        assert!(best >= (1.0 - 1e-6) * fisher_ratio(&sc, &unit_vector(&mut r, 2)));
    }
}

#[test]
fn more_genes_than_cells() {
    // S_w is singular here; the ridge keeps the problem solvable
    let mut r = rng(3);
    let rows = common::gaussian_rows(&mut r, 9, 40);
    let labels = [0, 0, 0, 1, 1, 1, 2, 2, 2];
    let mda = fit_mda(&Matrix::from_rows(&rows).unwrap(), &labels, DEFAULT_EPSILON_SCALE).unwrap();
    assert_eq!(mda.n_components(), 3);
    for c in 0..3 {
        let n: f64 = mda.components.column(c).iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }
    assert!(mda.eigenvalues[2] <= 1e-6 * mda.eigenvalues[0]);
}
