use nalgebra::{DMatrix, DVector};

use crate::data::Standardization;
use crate::error::{check_dim, Error, Result};
use crate::kernels::{cross_gram, gram, median_heuristic_sigma, KernelSpec};

/// Default ridge weight for the prediction pipeline.
pub const DEFAULT_RIDGE_REG: f64 = 1e-3;

/// Kernel ridge regression on reduced predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRidge {
    /// Training inputs after standardization, one point per row.
    train: DMatrix<f64>,
    scaling: Standardization,
    kernel: KernelSpec,
    alpha: DVector<f64>,
    intercept: f64,
}

impl KernelRidge {
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }
}

/// Fits `(G + reg n I) alpha = y - mean(y)` on the gaussian Gram of the
/// columns of `u` (`q x n`). Each coordinate of `u` is z-scored first and
/// the scale is the median heuristic on the scaled points.
pub fn kernel_ridge_fit(u: &DMatrix<f64>, y: &[f64], reg: f64) -> Result<KernelRidge> {
    let n = u.ncols();
    check_dim("kernel ridge sample size", n, y.len())?;
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(Error::invalid(format!("ridge reg must be positive, got {reg}")));
    }
    if n < 2 {
        return Err(Error::invalid("kernel ridge needs at least two observations"));
    }
    if u.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("kernel ridge inputs must be finite"));
    }
    let raw = u.transpose();
    let scaling = Standardization::from_columns(&raw);
    let train = scaling.apply(&raw)?;
    let intercept = y.iter().sum::<f64>() / n as f64;
    let target = DVector::from_iterator(n, y.iter().map(|v| v - intercept));

    // all inputs coincide: the best fit is the mean
    let kernel = match median_heuristic_sigma(&train) {
        Ok(s) => KernelSpec::gaussian(s)?,
        Err(Error::Degenerate(_)) => KernelSpec::gaussian(1.0)?,
        Err(e) => return Err(e),
    };
    let mut a = gram(&train, &kernel)?.into_entries();
    for i in 0..n {
        a[(i, i)] += reg * n as f64;
    }
    let alpha = a
        .cholesky()
        .ok_or_else(|| Error::numeric("kernel ridge system is not positive definite"))?
        .solve(&target);
    if alpha.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("kernel ridge solution is not finite"));
    }
    Ok(KernelRidge {
        train,
        scaling,
        kernel,
        alpha,
        intercept,
    })
}

/// Predictions at the columns of `u_new`.
pub fn kernel_ridge_predict(model: &KernelRidge, u_new: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_dim("kernel ridge input dimension", model.train.ncols(), u_new.nrows())?;
    let pts = model.scaling.apply(&u_new.transpose())?;
    let k = cross_gram(&model.train, &pts, &model.kernel)?;
    Ok(k.tr_mul(&model.alpha)
        .iter()
        .map(|v| v + model.intercept)
        .collect())
}
