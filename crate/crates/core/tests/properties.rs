use kernel_sdr::evaluation::{kcca_score, multiple_correlation};
use kernel_sdr::kernels::{center_gram, gram, KernelSpec};
use kernel_sdr::sdr::{gsksir1_objective, gsksir2_objective, CoefficientMatrix, FitConfig};
use kernel_sdr::smoothing::{nw_weights, SmootherSource};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn normal(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn kernel_strategy() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (0.3f64..5.0).prop_map(|s| KernelSpec::gaussian(s).unwrap()),
        (1u32..4, 0.0f64..2.0).prop_map(|(d, c)| KernelSpec::polynomial(d, c).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gram_is_symmetric_and_psd(n in 3usize..30, p in 1usize..5, seed in any::<u64>(), k in kernel_strategy()) {
        let x = normal(n, p, seed);
        let g = gram(&x, &k).unwrap().into_entries();
        prop_assert!((&g - g.transpose()).amax() == 0.0);
        let eig = SymmetricEigen::new(g.clone());
        let scale = g.diagonal().amax().max(1.0);
        prop_assert!(eig.eigenvalues.min() >= -1e-9 * scale * n as f64);
    }

    #[test]
    fn centering_zeroes_row_and_column_sums(n in 3usize..30, p in 1usize..5, seed in any::<u64>(), k in kernel_strategy()) {
        let x = normal(n, p, seed);
        let g = gram(&x, &k).unwrap();
        let scale = g.entries().amax().max(1.0);
        let c = center_gram(&g).unwrap().into_entries();
        for i in 0..n {
            prop_assert!(c.row(i).sum().abs() < 1e-8 * n as f64 * scale);
            prop_assert!(c.column(i).sum().abs() < 1e-8 * n as f64 * scale);
        }
    }

    #[test]
    fn smoother_columns_sum_to_one(n in 2usize..40, d in 1usize..3, h in 0.05f64..3.0, seed in any::<u64>()) {
        let v = normal(n, d, seed);
        let w = nw_weights(&v, h, SmootherSource::Response).unwrap().into_weights();
        for j in 0..n {
            prop_assert!((w.column(j).sum() - 1.0).abs() < 1e-10);
            prop_assert!(w.column(j).iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn multiple_correlation_is_affine_invariant(seed in any::<u64>(), shift in -5.0f64..5.0) {
        let u = normal(2, 80, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let a = loop {
            let a = DMatrix::<f64>::from_fn(2, 2, |_, _| rng.random_range(-2.0..2.0));
            if a.determinant().abs() > 0.1 {
                break a;
            }
        };
        let v = (&a * &u).add_scalar(shift);
        let r = multiple_correlation(&u, &v).unwrap();
        prop_assert!((r.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn multiple_correlation_is_symmetric(seed in any::<u64>(), k in 1usize..4, k2 in 1usize..4) {
        let u = normal(k, 60, seed);
        let noise = normal(k2, 60, seed ^ 7);
        let v = DMatrix::from_fn(k2, 60, |r, j| u[(0, j)] * (r as f64 + 1.0) + noise[(r, j)]);
        let a = multiple_correlation(&u, &v).unwrap();
        let b = multiple_correlation(&v, &u).unwrap();
        prop_assert!((a.value * a.eigenvalues.len() as f64 - b.value * b.eigenvalues.len() as f64).abs() < 1e-8);
    }

    #[test]
    fn kcca_is_invariant_to_similarity_maps(seed in any::<u64>(), angle in 0.0f64..std::f64::consts::TAU, scale in 0.2f64..5.0, shift in -3.0f64..3.0) {
        let u = normal(2, 40, seed);
        let y: Vec<f64> = (0..40).map(|j| u[(0, j)].powi(2) - u[(1, j)]).collect();
        let rot = DMatrix::from_row_slice(2, 2, &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()]) * scale;
        let v = (rot * &u).add_scalar(shift);
        let a = kcca_score(&u, &y, 0.1).unwrap();
        let b = kcca_score(&v, &y, 0.1).unwrap();
        prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn objectives_are_nonnegative_and_linear_in_lambda(seed in any::<u64>(), lambda in 0.0f64..10.0) {
        let x = normal(15, 2, seed);
        let y = DMatrix::from_fn(15, 1, |i, _| x[(i, 0)] * x[(i, 1)]);
        let rraw = gram(&x, &KernelSpec::gaussian(1.0).unwrap()).unwrap();
        let rc = center_gram(&rraw).unwrap();
        let k1 = nw_weights(&y, 0.8, SmootherSource::Response).unwrap();
        let c = CoefficientMatrix::new(normal(15, 2, seed ^ 3)).unwrap();
        let at = |l: f64| FitConfig { lambda: l, ..Default::default() };
        let pen = c.as_matrix().norm_squared();
        let v1 = gsksir1_objective(&c, &rc, &rraw, &k1, &at(lambda)).unwrap();
        let v2 = gsksir1_objective(&c, &rc, &rraw, &k1, &at(2.0 * lambda)).unwrap();
        prop_assert!(v1 >= lambda * pen - 1e-12);
        prop_assert!((v2 - v1 - lambda * pen).abs() <= 1e-9 * v2.max(1.0));
        let w = gsksir2_objective(&c, &rc, &rraw, &k1, &k1, &at(lambda)).unwrap();
        prop_assert!(w >= lambda * pen - 1e-12);
    }
}
