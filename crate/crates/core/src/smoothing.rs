//! Epanechnikov Nadaraya-Watson smoothers.
//!
//! A [`SmootherMatrix`] is column-stochastic: column `j` holds the weights
//! that average the sample at observation `j`, so `A * W` replaces every
//! column of `A` by its local average.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Which quantity the smoother conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmootherSource {
    Response,
    ProjectedFeatures,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmootherMatrix {
    weights: DMatrix<f64>,
    bandwidth: f64,
    source: SmootherSource,
}

impl SmootherMatrix {
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn into_weights(self) -> DMatrix<f64> {
        self.weights
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn source(&self) -> SmootherSource {
        self.source
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    /// Wraps an arbitrary column-stochastic matrix, e.g. the identity
    /// smoother used in tests.
    pub fn from_weights(weights: DMatrix<f64>, bandwidth: f64, source: SmootherSource) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::invalid("smoother matrix must be square"));
        }
        for (j, col) in weights.column_iter().enumerate() {
            if col.iter().any(|&w| w < 0.0 || !w.is_finite()) || (col.sum() - 1.0).abs() > 1e-10 {
                return Err(Error::invalid(format!(
                    "smoother column {j} is not a probability vector"
                )));
            }
        }
        Ok(Self {
            weights,
            bandwidth,
            source,
        })
    }
}

/// Bandwidth selection: data-driven or user supplied.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BandwidthSpec {
    #[default]
    Auto,
    Fixed(f64),
}

impl BandwidthSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BandwidthSpec::Fixed(h) if !(h > 0.0 && h.is_finite()) => {
                Err(Error::invalid(format!("fixed bandwidth must be positive, got {h}")))
            }
            _ => Ok(()),
        }
    }

    /// Resolves to a concrete bandwidth for smoothing over `values`.
    pub fn resolve(&self, values: &DMatrix<f64>) -> Result<f64> {
        self.validate()?;
        match *self {
            BandwidthSpec::Fixed(h) => Ok(h),
            BandwidthSpec::Auto => default_bandwidth(values),
        }
    }
}

/// Univariate Epanechnikov kernel scaled by `h`.
#[inline]
pub(crate) fn epanechnikov_1d(u: f64, h: f64) -> f64 {
    let t = u / h;
    if t.abs() <= 1.0 {
        0.75 * (1.0 - t * t) / h
    } else {
        0.0
    }
}

/// Derivative of [`epanechnikov_1d`] in `u` (one-sided value 0 outside the
/// open support).
#[inline]
pub(crate) fn epanechnikov_1d_deriv(u: f64, h: f64) -> f64 {
    let t = u / h;
    if t.abs() < 1.0 {
        -1.5 * t / (h * h)
    } else {
        0.0
    }
}

/// Product Epanechnikov kernel `prod_j K_h(u_j)`.
pub fn epanechnikov(u: &[f64], h: f64) -> f64 {
    debug_assert!(h > 0.0);
    u.iter().map(|&v| epanechnikov_1d(v, h)).product()
}

/// Robust per-coordinate scale: `MAD / 0.6745`, or the sample standard
/// deviation when more than half the values coincide.
fn robust_scale(col: &[f64]) -> f64 {
    let mut v = col.to_vec();
    let med = crate::kernels::median_in_place(&mut v);
    let mut dev: Vec<f64> = col.iter().map(|x| (x - med).abs()).collect();
    let mad = crate::kernels::median_in_place(&mut dev);
    if mad > 0.0 {
        return mad / 0.6745;
    }
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Indices and weights of the order statistics averaged by a median of
/// `v`, with ties broken by index.
fn median_support(v: &[f64]) -> (f64, Vec<(usize, f64)>) {
    let m = v.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    if m % 2 == 1 {
        (v[order[m / 2]], vec![(order[m / 2], 1.0)])
    } else {
        let (lo, hi) = (order[m / 2 - 1], order[m / 2]);
        (0.5 * (v[lo] + v[hi]), vec![(lo, 0.5), (hi, 0.5)])
    }
}

/// [`robust_scale`] together with its derivative with respect to every
/// entry of `col` (dense, length `col.len()`). The median-based scale is
/// piecewise linear, so this is exact away from ties.
pub(crate) fn robust_scale_with_gradient(col: &[f64]) -> (f64, Vec<f64>) {
    let m = col.len();
    let mut grad = vec![0.0; m];
    let (med, med_idx) = median_support(col);
    let dev: Vec<f64> = col.iter().map(|x| (x - med).abs()).collect();
    let (mad, mad_idx) = median_support(&dev);
    if mad > 0.0 {
        for &(i, wi) in &mad_idx {
            let sign = (col[i] - med).signum();
            grad[i] += wi * sign / 0.6745;
            for &(k, wk) in &med_idx {
                grad[k] -= wi * sign * wk / 0.6745;
            }
        }
        return (mad / 0.6745, grad);
    }
    let nf = m as f64;
    let mean = col.iter().sum::<f64>() / nf;
    let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    if sd > 0.0 {
        for (g, x) in grad.iter_mut().zip(col) {
            *g = (x - mean) / ((nf - 1.0) * sd);
        }
    }
    (sd, grad)
}

/// The factor `1.06 * n^(-1/(4+d))` of [`default_bandwidth`].
pub(crate) fn bandwidth_factor(n: usize, d: usize) -> f64 {
    1.06 * (n as f64).powf(-1.0 / (4.0 + d as f64))
}

/// Normal-reference bandwidth `1.06 * s * n^(-1/(4+d))` for an `n x d`
/// sample, `s` being the mean robust scale over coordinates.
pub fn default_bandwidth(values: &DMatrix<f64>) -> Result<f64> {
    let (n, d) = values.shape();
    if n < 2 || d == 0 {
        return Err(Error::invalid("bandwidth selection needs at least two points"));
    }
    let scales: Vec<f64> = values
        .column_iter()
        .map(|c| robust_scale(c.as_slice()))
        .collect();
    let s = scales.iter().sum::<f64>() / d as f64;
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::degenerate("values have zero spread in every coordinate"));
    }
    let h = bandwidth_factor(n, d) * s;
    Ok(h.max(1e-6 * s))
}

/// Unnormalized product-kernel weights `W_ij = K_h(v_i - v_j)` for points
/// stored one per column of `coords` (a `d x n` slice set), plus the
/// column sums.
pub(crate) fn product_kernel_weights(coords: &[Vec<f64>], h: f64) -> (DMatrix<f64>, Vec<f64>) {
    let n = coords.first().map_or(0, Vec::len);
    let mut w = DMatrix::from_element(n, n, 1.0);
    for c in coords {
        for j in 0..n {
            for i in j..n {
                let k = epanechnikov_1d(c[i] - c[j], h);
                w[(i, j)] *= k;
                if i != j {
                    w[(j, i)] *= k;
                }
            }
        }
    }
    let sums = (0..n).map(|j| w.column(j).sum()).collect();
    (w, sums)
}

/// Normalizes the columns of `w` in place; columns whose mass underflows
/// fall back to uniform weights. Returns the indices of such columns.
pub(crate) fn normalize_columns(w: &mut DMatrix<f64>, sums: &[f64]) -> Vec<usize> {
    let n = w.nrows();
    let mut fallback = Vec::new();
    for (j, mut col) in w.column_iter_mut().enumerate() {
        let s = sums[j];
        if s > 0.0 && s.is_finite() {
            col /= s;
        } else {
            col.fill(1.0 / n as f64);
            fallback.push(j);
        }
    }
    fallback
}

/// Column-stochastic Nadaraya-Watson weights over the rows of `values`
/// (`n x d`): `W_ij = K_h(v_i - v_j) / sum_l K_h(v_l - v_j)`.
///
/// The `l = j` term is part of every denominator, so a column can only
/// lose its mass through underflow.
pub fn nw_weights(values: &DMatrix<f64>, h: f64, source: SmootherSource) -> Result<SmootherMatrix> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {h}")));
    }
    let coords: Vec<Vec<f64>> = values
        .column_iter()
        .map(|c| c.iter().copied().collect())
        .collect();
    let (mut w, sums) = product_kernel_weights(&coords, h);
    normalize_columns(&mut w, &sums);
    Ok(SmootherMatrix {
        weights: w,
        bandwidth: h,
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn epanechnikov_examples() {
        assert_eq!(epanechnikov(&[0.0], 1.0), 0.75);
        assert_eq!(epanechnikov(&[1.0], 1.0), 0.0);
        assert_eq!(epanechnikov(&[0.0, 0.0], 2.0), 0.375 * 0.375);
    }

    #[test]
    fn epanechnikov_integrates_to_one() {
        // composite Simpson on [-h, h]
        let h = 2.0;
        let m = 2000;
        let step = 2.0 * h / m as f64;
        let mut acc = 0.0;
        for i in 0..=m {
            let u = -h + i as f64 * step;
            let wgt = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += wgt * epanechnikov(&[u], h);
        }
        assert_abs_diff_eq!(acc * step / 3.0, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let h = 0.7;
        for &u in &[-0.5, -0.1, 0.0, 0.3, 0.69] {
            let e = 1e-7;
            let fd = (epanechnikov_1d(u + e, h) - epanechnikov_1d(u - e, h)) / (2.0 * e);
            assert_abs_diff_eq!(epanechnikov_1d_deriv(u, h), fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn default_bandwidth_closed_form() {
        // median 0 and median absolute deviation 0.6745, so robust scale 1
        let mut v = Vec::new();
        for _ in 0..40 {
            v.extend_from_slice(&[-1.0, -0.6745, 0.0, 0.6745, 1.0]);
        }
        let values = DMatrix::from_column_slice(200, 1, &v);
        let h = default_bandwidth(&values).unwrap();
        assert_abs_diff_eq!(h, 1.06 * 200f64.powf(-0.2), epsilon = 1e-12);
        assert_abs_diff_eq!(h, 0.3675, epsilon = 5e-4);
    }

    #[test]
    fn robust_scale_gradient_matches_difference_quotient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in [7, 8, 31, 40] {
            let v: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
            let (s, g) = robust_scale_with_gradient(&v);
            assert_abs_diff_eq!(s, robust_scale(&v), epsilon = 1e-14);
            for k in 0..m {
                let e = 1e-7;
                let mut up = v.clone();
                up[k] += e;
                let mut down = v.clone();
                down[k] -= e;
                let fd = (robust_scale(&up) - robust_scale(&down)) / (2.0 * e);
                assert_abs_diff_eq!(g[k], fd, epsilon = 1e-6);
            }
        }
        // all but one value equal: the standard deviation branch
        let v = vec![1.0, 1.0, 1.0, 1.0, 3.0];
        let (s, g) = robust_scale_with_gradient(&v);
        assert_abs_diff_eq!(s, robust_scale(&v), epsilon = 1e-14);
        let fd = {
            let mut up = v.clone();
            up[4] += 1e-7;
            let mut down = v.clone();
            down[4] -= 1e-7;
            (robust_scale(&up) - robust_scale(&down)) / 2e-7
        };
        assert_abs_diff_eq!(g[4], fd, epsilon = 1e-6);
    }

    #[test]
    fn default_bandwidth_is_homogeneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = DMatrix::from_fn(40, 2, |_, _| rng.random_range(-1.0..1.0));
        let h1 = default_bandwidth(&v).unwrap();
        let h2 = default_bandwidth(&(v * 2.0)).unwrap();
        assert_abs_diff_eq!(h2, 2.0 * h1, epsilon = 1e-12);
    }

    #[test]
    fn default_bandwidth_matches_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        let med = 0.5 * (sorted[49] + sorted[50]);
        let mut dev: Vec<f64> = v.iter().map(|x| (x - med).abs()).collect();
        dev.sort_by(f64::total_cmp);
        let scale = 0.5 * (dev[49] + dev[50]) / 0.6745;
        let expected = 1.06 * scale * 100f64.powf(-0.2);
        let h = default_bandwidth(&DMatrix::from_column_slice(100, 1, &v)).unwrap();
        assert_abs_diff_eq!(h, expected, epsilon = 1e-12);
    }

    #[test]
    fn default_bandwidth_discrete_falls_back_to_sd() {
        // more than half zeros: MAD is zero, sd is not
        let v = DMatrix::from_column_slice(5, 1, &[0.0, 0.0, 0.0, 1.0, 2.0]);
        assert!(default_bandwidth(&v).unwrap() > 0.0);
    }

    #[test]
    fn default_bandwidth_degenerate() {
        let v = DMatrix::from_element(10, 2, 3.0);
        assert!(matches!(default_bandwidth(&v), Err(Error::Degenerate(_))));
    }

    #[test]
    fn identical_values_give_uniform_weights() {
        let v = DMatrix::from_element(5, 1, 2.0);
        let s = nw_weights(&v, 0.3, SmootherSource::Response).unwrap();
        assert!(s.weights().iter().all(|&w| (w - 0.2).abs() < 1e-15));
    }

    #[test]
    fn isolated_points_give_identity() {
        let v = DMatrix::from_column_slice(2, 1, &[0.0, 10.0]);
        let s = nw_weights(&v, 1.0, SmootherSource::Response).unwrap();
        assert_eq!(s.weights(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn random_columns_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = DMatrix::from_fn(20, 1, |_, _| rng.random_range(-3.0..3.0));
        for &h in &[0.05, 0.5, 5.0] {
            let s = nw_weights(&v, h, SmootherSource::Response).unwrap();
            for col in s.weights().column_iter() {
                assert_abs_diff_eq!(col.sum(), 1.0, epsilon = 1e-10);
                assert!(col.iter().all(|&w| w >= 0.0));
            }
        }
    }

    #[test]
    fn rejects_nonpositive_bandwidth() {
        let v = DMatrix::from_element(3, 1, 0.0);
        assert!(nw_weights(&v, 0.0, SmootherSource::Response).is_err());
        assert!(BandwidthSpec::Fixed(-1.0).validate().is_err());
    }
}
