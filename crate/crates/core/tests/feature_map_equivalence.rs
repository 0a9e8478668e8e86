//! Feature-space and Gram-space forms of the GS-KSIR-I residual vanish
//! together, checked with the explicit feature map of the degree-2
//! polynomial kernel.

use kernel_sdr::kernels::{center_gram, gram, KernelSpec};
use kernel_sdr::sdr::{gsksir1_residual, projected_features, projected_smoother, CoefficientMatrix};
use kernel_sdr::smoothing::{default_bandwidth, nw_weights, SmootherSource};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OFFSET: f64 = 1.0;

/// Features of `(s . t + c)^2`: squares, scaled cross products, scaled
/// linear terms and a constant. One column per observation.
fn feature_map(x: &DMatrix<f64>) -> DMatrix<f64> {
    let p = x.ncols();
    let dim = p + p * (p - 1) / 2 + p + 1;
    let mut phi = DMatrix::zeros(dim, x.nrows());
    for (i, row) in x.row_iter().enumerate() {
        let mut k = 0;
        for a in 0..p {
            phi[(k, i)] = row[a] * row[a];
            k += 1;
        }
        for a in 0..p {
            for b in (a + 1)..p {
                phi[(k, i)] = 2f64.sqrt() * row[a] * row[b];
                k += 1;
            }
        }
        for a in 0..p {
            phi[(k, i)] = (2.0 * OFFSET).sqrt() * row[a];
            k += 1;
        }
        phi[(k, i)] = OFFSET;
    }
    phi
}

fn centered_columns(phi: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = phi.clone();
    for mut row in out.row_iter_mut() {
        let m = row.mean();
        row.add_scalar_mut(-m);
    }
    out
}

struct Setup {
    phi_c: DMatrix<f64>,
    rc: DMatrix<f64>,
    rraw: kernel_sdr::GramMatrix,
    k1: DMatrix<f64>,
}

fn setup(seed: u64) -> Setup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::<f64>::from_fn(25, 3, |_, _| rng.random_range(-1.0..1.0));
    let y = DVector::from_fn(25, |i, _| x[(i, 0)].powi(2) + x[(i, 1)] + 0.1 * rng.random_range(-1.0..1.0));
    let kernel = KernelSpec::polynomial(2, OFFSET).unwrap();
    let rraw = gram(&x, &kernel).unwrap();
    let rc = center_gram(&rraw).unwrap().into_entries();
    let ycol = DMatrix::from_column_slice(25, 1, y.as_slice());
    let h1 = default_bandwidth(&ycol).unwrap();
    let k1 = nw_weights(&ycol, h1, SmootherSource::Response).unwrap().into_weights();
    Setup {
        phi_c: centered_columns(&feature_map(&x)),
        rc,
        rraw,
        k1,
    }
}

/// `|| Phi~ K1 (I - K2)(I - K2)' Phi~' ||_F^2`
fn feature_residual(s: &Setup, k2: &DMatrix<f64>) -> f64 {
    let m = DMatrix::identity(25, 25) - k2;
    (&s.phi_c * &s.k1 * &m * m.transpose() * s.phi_c.transpose()).norm_squared()
}

fn random_c(seed: u64) -> CoefficientMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CoefficientMatrix::new(DMatrix::from_fn(25, 2, |_, _| rng.random_range(-1.0..1.0))).unwrap()
}

#[test]
fn explicit_features_reproduce_the_gram_matrix() {
    let s = setup(1);
    let phi = feature_map(&{
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        DMatrix::<f64>::from_fn(25, 3, |_, _| rng.random_range(-1.0..1.0))
    });
    let diff = phi.tr_mul(&phi) - s.rraw.entries();
    assert!(diff.amax() < 1e-10, "max deviation {}", diff.amax());
    let diff_c = s.phi_c.tr_mul(&s.phi_c) - &s.rc;
    assert!(diff_c.amax() < 1e-10, "centered deviation {}", diff_c.amax());
}

#[test]
fn residuals_vanish_together_at_a_separating_coefficient_matrix() {
    let s = setup(2);
    let c = random_c(3);
    // a bandwidth below the smallest coordinate gap of the projected
    // features isolates every point, so K2 = I
    let z = projected_features(&c, &s.rraw).unwrap();
    let mut gap = f64::INFINITY;
    for i in 0..25 {
        for j in (i + 1)..25 {
            let d = (0..2).map(|r| (z[(r, i)] - z[(r, j)]).abs()).fold(0.0, f64::max);
            gap = gap.min(d);
        }
    }
    assert!(gap > 0.0);
    let k2 = projected_smoother(&c, &s.rraw, 0.5 * gap).unwrap().into_weights();
    assert_eq!(k2, DMatrix::identity(25, 25));
    let feat = feature_residual(&s, &k2);
    let gram_form = gsksir1_residual(&s.rc, &s.k1, &k2).unwrap();
    assert!(feat <= 1e-8 && gram_form <= 1e-8, "{feat} {gram_form}");
}

#[test]
fn residuals_are_nonzero_together_at_a_random_coefficient_matrix() {
    for seed in 0..5 {
        let s = setup(10 + seed);
        let c = random_c(20 + seed);
        let z = projected_features(&c, &s.rraw).unwrap();
        let h2 = default_bandwidth(&z.transpose()).unwrap();
        let k2 = projected_smoother(&c, &s.rraw, h2).unwrap().into_weights();
        let feat = feature_residual(&s, &k2);
        let gram_form = gsksir1_residual(&s.rc, &s.k1, &k2).unwrap();
        assert!(feat > 1e-6 && gram_form > 1e-6, "{feat} {gram_form}");
    }
}

#[test]
fn feature_residual_zero_iff_gram_residual_zero_for_partial_isolation() {
    // K2 equal to the identity except on a block of points forces both
    // forms to agree on whether they vanish
    let s = setup(4);
    let mut k2 = DMatrix::identity(25, 25);
    for i in 0..3 {
        for j in 0..3 {
            k2[(i, j)] = 1.0 / 3.0;
        }
    }
    let feat = feature_residual(&s, &k2);
    let gram_form = gsksir1_residual(&s.rc, &s.k1, &k2).unwrap();
    assert!(feat > 1e-10 && gram_form > 1e-10);
    // the Gram form is the feature form pushed through Phi~' ( . ) Phi~
    let m = DMatrix::identity(25, 25) - &k2;
    let a = &s.phi_c * &s.k1 * &m * m.transpose() * s.phi_c.transpose();
    let pushed = (s.phi_c.transpose() * &a * &s.phi_c).norm_squared();
    assert!((pushed - gram_form).abs() <= 1e-8 * gram_form.max(1.0));
}
