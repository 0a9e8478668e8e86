//! Reproducing kernels, Gram matrices and double-centering.

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};

/// A positive-definite reproducing kernel on `R^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `exp(-|s - t|^2 / (2 sigma^2))`
    Gaussian { sigma: f64 },
    /// `(s . t + offset)^degree`
    Polynomial { degree: u32, offset: f64 },
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        let k = KernelSpec::Gaussian { sigma };
        k.validate()?;
        Ok(k)
    }

    pub fn polynomial(degree: u32, offset: f64) -> Result<Self> {
        let k = KernelSpec::Polynomial { degree, offset };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => Err(
                Error::invalid(format!("gaussian sigma must be positive, got {sigma}")),
            ),
            KernelSpec::Polynomial { degree: 0, .. } => {
                Err(Error::invalid("polynomial degree must be at least 1"))
            }
            KernelSpec::Polynomial { offset, .. } if !offset.is_finite() => {
                Err(Error::invalid("polynomial offset must be finite"))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    fn eval_unchecked(&self, s: impl Iterator<Item = f64>, t: impl Iterator<Item = f64>) -> f64 {
        match *self {
            KernelSpec::Gaussian { sigma } => {
                let d2: f64 = s.zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            KernelSpec::Polynomial { degree, offset } => {
                let dot: f64 = s.zip(t).map(|(a, b)| a * b).sum();
                (dot + offset).powi(degree as i32)
            }
        }
    }
}

/// Evaluates `k(s, t)`.
pub fn kernel_eval(k: &KernelSpec, s: &[f64], t: &[f64]) -> Result<f64> {
    check_dim("kernel arguments", s.len(), t.len())?;
    k.validate()?;
    let v = k.eval_unchecked(s.iter().copied(), t.iter().copied());
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::numeric("kernel evaluation overflowed"))
    }
}

/// Kernel evaluations between all pairs of sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    centered: bool,
    kernel: KernelSpec,
}

impl GramMatrix {
    /// Wraps a precomputed symmetric matrix. Intended for tests and for
    /// callers that build Gram matrices from an explicit feature map.
    pub fn from_entries(entries: DMatrix<f64>, kernel: KernelSpec, centered: bool) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::invalid("Gram matrix must be square"));
        }
        Ok(Self {
            entries,
            centered,
            kernel,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }
}

fn rows_as_vecs(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Builds the Gram matrix `R_ij = k(x_i, x_j)` over the rows of `x`.
pub fn gram(x: &DMatrix<f64>, k: &KernelSpec) -> Result<GramMatrix> {
    k.validate()?;
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid("Gram matrix needs at least two points"));
    }
    let rows = rows_as_vecs(x);
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = k.eval_unchecked(rows[i].iter().copied(), rows[j].iter().copied());
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("Gram matrix has non-finite entries"));
    }
    Ok(GramMatrix {
        entries: r,
        centered: false,
        kernel: *k,
    })
}

/// Kernel matrix between training rows (matrix rows) and new points
/// (matrix columns): `out[(i, j)] = k(train_i, new_j)`.
pub fn cross_gram(train: &DMatrix<f64>, new: &DMatrix<f64>, k: &KernelSpec) -> Result<DMatrix<f64>> {
    k.validate()?;
    check_dim("cross-kernel predictor count", train.ncols(), new.ncols())?;
    let a = rows_as_vecs(train);
    let b = rows_as_vecs(new);
    let out = DMatrix::from_fn(a.len(), b.len(), |i, j| {
        k.eval_unchecked(a[i].iter().copied(), b[j].iter().copied())
    });
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("cross-kernel matrix has non-finite entries"));
    }
    Ok(out)
}

/// Double-centers a Gram matrix: `(I - J/n) R (I - J/n)`.
///
/// Refuses matrices that are already centered so that centering is never
/// silently applied twice.
pub fn center_gram(r: &GramMatrix) -> Result<GramMatrix> {
    if r.centered {
        return Err(Error::invalid("Gram matrix is already centered"));
    }
    let n = r.n();
    let m = &r.entries;
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| m.row(i).sum() / nf).collect();
    let col_means: Vec<f64> = (0..n).map(|j| m.column(j).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    let mut c = DMatrix::from_fn(n, n, |i, j| m[(i, j)] - row_means[i] - col_means[j] + grand);
    // restore exact symmetry lost to rounding
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(GramMatrix {
        entries: c,
        centered: true,
        kernel: r.kernel,
    })
}

/// Median of all pairwise Euclidean distances between rows.
pub fn median_heuristic_sigma(x: &DMatrix<f64>) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid("median heuristic needs at least two points"));
    }
    let rows = rows_as_vecs(x);
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d.push(s.sqrt());
        }
    }
    let med = median_in_place(&mut d);
    if med > 0.0 {
        Ok(med)
    } else if d.iter().any(|&v| v > 0.0) {
        // more than half the pairs coincide; fall back to the positive ones
        let mut pos: Vec<f64> = d.into_iter().filter(|&v| v > 0.0).collect();
        Ok(median_in_place(&mut pos))
    } else {
        Err(Error::degenerate("all rows are identical"))
    }
}

pub(crate) fn median_in_place(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Gaussian kernel with the median-heuristic scale of `x`.
pub fn default_kernel(x: &DMatrix<f64>) -> Result<KernelSpec> {
    KernelSpec::gaussian(median_heuristic_sigma(x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn kernel_eval_examples() {
        let g = KernelSpec::gaussian(1.0).unwrap();
        assert_eq!(kernel_eval(&g, &[0.3, -1.2], &[0.3, -1.2]).unwrap(), 1.0);
        assert_abs_diff_eq!(
            kernel_eval(&g, &[0.0], &[1.0]).unwrap(),
            (-0.5f64).exp(),
            epsilon = 1e-15
        );
        let p = KernelSpec::polynomial(2, 1.0).unwrap();
        assert_eq!(kernel_eval(&p, &[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn kernel_eval_rejects_mismatch() {
        let g = KernelSpec::gaussian(1.0).unwrap();
        assert!(matches!(
            kernel_eval(&g, &[0.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn invalid_specs() {
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::gaussian(-1.0).is_err());
        assert!(KernelSpec::polynomial(0, 1.0).is_err());
    }

    #[test]
    fn gram_examples() {
        let g = KernelSpec::gaussian(1.0).unwrap();
        let same = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.5, 1.0]);
        assert_eq!(gram(&same, &g).unwrap().entries(), &DMatrix::from_element(2, 2, 1.0));

        let x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let r = gram(&x, &g).unwrap();
        let e = (-0.5f64).exp();
        assert_abs_diff_eq!(
            r.entries(),
            &DMatrix::from_row_slice(2, 2, &[1.0, e, e, 1.0]),
            epsilon = 1e-15
        );
        assert!(!r.is_centered());
    }

    #[test]
    fn gram_needs_two_points() {
        let g = KernelSpec::gaussian(1.0).unwrap();
        assert!(gram(&DMatrix::zeros(1, 3), &g).is_err());
    }

    #[test]
    fn random_gram_is_psd() {
        let x = random_matrix(5, 2, 11);
        let g = default_kernel(&x).unwrap();
        let r = gram(&x, &g).unwrap();
        let eig = SymmetricEigen::new(r.entries().clone());
        assert!(eig.eigenvalues.min() >= -1e-10);
    }

    #[test]
    fn centering_examples() {
        let g = KernelSpec::gaussian(1.0).unwrap();
        let ones = GramMatrix::from_entries(DMatrix::from_element(4, 4, 1.0), g, false).unwrap();
        let c = center_gram(&ones).unwrap();
        assert!(c.entries().iter().all(|v| v.abs() < 1e-15));
        assert!(c.is_centered());

        let id = GramMatrix::from_entries(DMatrix::identity(2, 2), g, false).unwrap();
        let c = center_gram(&id).unwrap();
        assert_abs_diff_eq!(
            c.entries(),
            &DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]),
            epsilon = 1e-15
        );
    }

    #[test]
    fn centering_twice_is_an_error() {
        let x = random_matrix(6, 2, 3);
        let r = gram(&x, &default_kernel(&x).unwrap()).unwrap();
        let c = center_gram(&r).unwrap();
        assert!(matches!(center_gram(&c), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn centered_random_psd_has_zero_row_sums() {
        let a = random_matrix(6, 6, 5);
        let psd = &a * a.transpose();
        let r = GramMatrix::from_entries(psd, KernelSpec::gaussian(1.0).unwrap(), false).unwrap();
        let c = center_gram(&r).unwrap();
        for i in 0..6 {
            assert!(c.entries().row(i).sum().abs() < 1e-10);
        }
    }

    #[test]
    fn median_heuristic_examples() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 2.0]);
        assert_eq!(median_heuristic_sigma(&x).unwrap(), 2.0);
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 3.0]);
        assert_eq!(median_heuristic_sigma(&x).unwrap(), 2.0);
    }

    #[test]
    fn median_heuristic_degenerate() {
        let x = DMatrix::from_element(4, 2, 1.5);
        assert!(matches!(median_heuristic_sigma(&x), Err(Error::Degenerate(_))));
    }

    #[test]
    fn median_heuristic_matches_brute_force() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let x = DMatrix::from_fn(50, 4, |_, _| StandardNormal.sample(&mut rng));
        let mut pairs = Vec::new();
        for i in 0..50 {
            for j in 0..i {
                pairs.push((x.row(i) - x.row(j)).norm());
            }
        }
        assert_eq!(pairs.len(), 1225);
        pairs.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(median_heuristic_sigma(&x).unwrap(), pairs[612], epsilon = 1e-12);
    }

    #[test]
    fn cross_gram_against_training_is_gram() {
        let x = random_matrix(7, 3, 9);
        let k = default_kernel(&x).unwrap();
        let r = gram(&x, &k).unwrap();
        let cross = cross_gram(&x, &x, &k).unwrap();
        assert_abs_diff_eq!(r.entries(), &cross, epsilon = 1e-15);
    }
}
