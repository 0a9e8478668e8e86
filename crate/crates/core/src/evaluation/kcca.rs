use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{check_dim, Error, Result};
use crate::kernels::{center_gram, gram, median_heuristic_sigma, KernelSpec};

/// Default Tikhonov weight for [`kcca_score`].
pub const DEFAULT_KCCA_REG: f64 = 0.1;

/// Eigen-directions of a centered Gram whose eigenvalue falls below this
/// fraction of the largest are discarded.
const SPECTRUM_FLOOR: f64 = 1e-12;

/// Centered gaussian Gram of the points in the rows of `points`, with the
/// median-heuristic scale, as an eigenbasis scaled by the KCCA shrinkage
/// `e / sqrt(e^2 + kappa)`.
fn shrunk_basis(points: &DMatrix<f64>, kappa: f64) -> Result<DMatrix<f64>> {
    let sigma = median_heuristic_sigma(points)?;
    let g = gram(points, &KernelSpec::gaussian(sigma)?)?;
    let gc = center_gram(&g)?.into_entries();
    let eig = SymmetricEigen::try_new(gc, f64::EPSILON, 0)
        .ok_or_else(|| Error::numeric("KCCA eigendecomposition did not converge"))?;
    let top = eig.eigenvalues.max();
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > SPECTRUM_FLOOR * top.max(0.0))
        .collect();
    let mut out = DMatrix::zeros(points.nrows(), keep.len());
    for (k, &i) in keep.iter().enumerate() {
        let e = eig.eigenvalues[i];
        let f = e / (e * e + kappa).sqrt();
        out.set_column(k, &(eig.eigenvectors.column(i) * f));
    }
    Ok(out)
}

/// First regularized kernel canonical correlation between the columns of
/// `u` (`q x m`) and the response `y`.
///
/// Both views use centered gaussian Grams with median-heuristic scales.
/// With `kappa = reg * m`, the value is the largest root of
/// `Gu Gy b = rho (Gu^2 + kappa I) a`, `Gy Gu a = rho (Gy^2 + kappa I) b`,
/// clipped to `[0, 1]`.
pub fn kcca_score(u: &DMatrix<f64>, y: &[f64], reg: f64) -> Result<f64> {
    let m = u.ncols();
    check_dim("kcca sample size", m, y.len())?;
    if m < 5 {
        return Err(Error::invalid("kcca needs at least five observations"));
    }
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(Error::invalid(format!("kcca reg must be positive, got {reg}")));
    }
    if u.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("kcca inputs must be finite"));
    }
    let kappa = reg * m as f64;
    let fu = shrunk_basis(&u.transpose(), kappa)?;
    let fy = shrunk_basis(&DMatrix::from_column_slice(m, 1, y), kappa)?;
    if fu.ncols() == 0 || fy.ncols() == 0 {
        return Ok(0.0);
    }
    let cross = fu.tr_mul(&fy);
    let sv = cross
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::numeric("KCCA singular value decomposition did not converge"))?
        .singular_values;
    Ok(sv.max().clamp(0.0, 1.0))
}
