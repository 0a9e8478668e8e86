//! Kernel sliced inverse regression, used as the baseline estimator and
//! as the starting point of the penalized fits.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::objective::SpectralBasis;
use super::CoefficientMatrix;
use crate::error::{check_dim, Error, Result};
use crate::kernels::GramMatrix;

/// Assigns each observation to one of `n_slices` quantile slices of `y`.
/// Tied responses always share a slice (the one containing their
/// mid-rank), so some slices may come out empty; the second return value counts the non-empty ones.
pub fn quantile_slices(y: &DVector<f64>, n_slices: usize) -> (Vec<usize>, usize) {
    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
    let mut slice = vec![0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && y[order[end]] == y[order[start]] {
            end += 1;
        }
        // a block of ties goes to the slice of its mid-rank
        let mid2 = start + end - 1;
        let s = (mid2 * n_slices / (2 * n)).min(n_slices - 1);
        for &i in &order[start..end] {
            slice[i] = s;
        }
        start = end;
    }
    let mut used = vec![false; n_slices];
    for &s in &slice {
        used[s] = true;
    }
    (slice, used.iter().filter(|&&u| u).count())
}

/// Top-`q` KSIR directions in representer coefficients.
///
/// Solves `R~ Omega R~ c = mu (R~ R~ + n ridge I) c`, where `Omega` is the
/// between-slice covariance of the slice-indicator weight vectors, and
/// scales every returned column to `c' R~ c = 1`.
pub fn ksir_init(
    rc: &GramMatrix,
    y: &DVector<f64>,
    q: usize,
    n_slices: usize,
    ridge: f64,
) -> Result<CoefficientMatrix> {
    if !rc.is_centered() {
        return Err(Error::invalid("KSIR needs the centered Gram matrix"));
    }
    let basis = SpectralBasis::new(rc.entries());
    ksir_with_basis(rc.entries(), &basis, y, q, n_slices, ridge)
}

pub(crate) fn ksir_with_basis(
    rc: &DMatrix<f64>,
    basis: &SpectralBasis,
    y: &DVector<f64>,
    q: usize,
    n_slices: usize,
    ridge: f64,
) -> Result<CoefficientMatrix> {
    let n = rc.nrows();
    check_dim("KSIR response length", n, y.len())?;
    if n_slices < 2 {
        return Err(Error::invalid("KSIR needs at least two slices"));
    }
    if q == 0 || q >= n {
        return Err(Error::invalid(format!("reduced dimension must satisfy 1 <= q < n, got {q}")));
    }
    if !(ridge > 0.0) {
        return Err(Error::invalid("KSIR ridge must be positive"));
    }

    let (mut slice, mut used) = quantile_slices(y, n_slices);
    let mut h = n_slices;
    if used < h {
        h = used;
        if h >= 2 {
            (slice, used) = quantile_slices(y, h);
        }
    }
    if h < 2 {
        return Err(Error::degenerate("no directional signal: response is constant"));
    }
    if used < h {
        return Err(Error::invalid(format!(
            "empty slice remains after reducing to {h} slices"
        )));
    }

    let nf = n as f64;
    let mut counts = vec![0usize; h];
    for &s in &slice {
        counts[s] += 1;
    }

    // T = [sqrt(n_h/n) D L V' (w_h - 1/n)], D = (L^2 + n ridge)^(-1/2)
    let v = &basis.vectors;
    let lam = &basis.values;
    let scale = DVector::from_iterator(n, lam.iter().map(|&l| l / (l * l + nf * ridge).sqrt()));
    let mut t = DMatrix::zeros(n, h);
    for s in 0..h {
        let w = DVector::from_iterator(
            n,
            slice
                .iter()
                .map(|&si| (if si == s { 1.0 / counts[s] as f64 } else { 0.0 }) - 1.0 / nf),
        );
        let proj = v.tr_mul(&w).component_mul(&scale) * (counts[s] as f64 / nf).sqrt();
        t.set_column(s, &proj);
    }

    let small = SymmetricEigen::new(t.tr_mul(&t));
    let mut order: Vec<usize> = (0..h).collect();
    order.sort_by(|&a, &b| small.eigenvalues[b].total_cmp(&small.eigenvalues[a]));
    let top = small.eigenvalues[order[0]];
    if !(top > 1e-14) {
        return Err(Error::degenerate("no directional signal: between-slice variation is zero"));
    }
    if q > order.len() || small.eigenvalues[order[q - 1]] <= 1e-12 * top {
        return Err(Error::degenerate(format!(
            "no directional signal: fewer than {q} nonzero KSIR eigenvalues"
        )));
    }

    let inv_sqrt = DVector::from_iterator(n, lam.iter().map(|&l| 1.0 / (l * l + nf * ridge).sqrt()));
    let mut c = DMatrix::zeros(n, q);
    for (k, &idx) in order.iter().take(q).enumerate() {
        let mu = small.eigenvalues[idx];
        let w = &t * small.eigenvectors.column(idx) / mu.sqrt();
        let mut col = v * w.component_mul(&inv_sqrt);
        let norm2 = col.dot(&(rc * &col));
        if !(norm2 > 0.0 && norm2.is_finite()) {
            return Err(Error::numeric("KSIR direction has zero RKHS norm"));
        }
        col /= norm2.sqrt();
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col = -col;
        }
        c.set_column(k, &col);
    }
    CoefficientMatrix::new(c)
}
