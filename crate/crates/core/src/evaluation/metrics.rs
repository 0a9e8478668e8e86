use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{check_dim, Error, Result};

/// Outcome of [`multiple_correlation`].
#[derive(Debug, Clone, PartialEq)]
pub struct MultipleCorrelation {
    /// Mean of the nonzero squared canonical correlations, in `[0, 1]`.
    pub value: f64,
    /// The eigenvalues that were averaged.
    pub eigenvalues: Vec<f64>,
    /// Set when either argument has no variation at all; `value` is then 0.
    pub degenerate: bool,
}

/// Eigenvalues below this fraction of the largest count as zero.
const NONZERO_REL: f64 = 1e-10;
const COV_RIDGE: f64 = 1e-8;

/// Sample covariance between the rows of `a` (`k x n`) and `b` (`k' x n`).
fn cross_cov(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols() as f64;
    let ac = centered_rows(a);
    let bc = centered_rows(b);
    ac * bc.transpose() / (n - 1.0)
}

fn centered_rows(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = a.clone();
    for mut row in out.row_iter_mut() {
        let m = row.mean();
        row.add_scalar_mut(-m);
    }
    out
}

/// Symmetric inverse square root, treating eigenvalues at or below
/// `COV_RIDGE * trace` as zero.
fn inv_sqrt(s: &DMatrix<f64>) -> DMatrix<f64> {
    let floor = COV_RIDGE * s.trace();
    let eig = SymmetricEigen::new(s.clone());
    let d = eig.eigenvalues.map(|v| if v > floor { 1.0 / v.sqrt() } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Average squared canonical correlation between the rows of `u` and `v`:
/// the mean of the nonzero eigenvalues of
/// `Var(u)^-1/2 Cov(u, v) Var(v)^-1 Cov(v, u) Var(u)^-1/2`.
///
/// The number of eigenvalues averaged is the numerical rank of that
/// matrix, not the row count of `u`.
pub fn multiple_correlation(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<MultipleCorrelation> {
    check_dim("multiple correlation sample size", u.ncols(), v.ncols())?;
    if u.ncols() < 3 || u.nrows() == 0 || v.nrows() == 0 {
        return Err(Error::invalid("multiple correlation needs at least three observations"));
    }
    if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
        return Err(Error::invalid("multiple correlation inputs must be finite"));
    }
    let suu = cross_cov(u, u);
    let svv = cross_cov(v, v);
    if !(suu.trace() > 0.0) || !(svv.trace() > 0.0) {
        return Ok(MultipleCorrelation {
            value: 0.0,
            eigenvalues: Vec::new(),
            degenerate: true,
        });
    }
    let suv = cross_cov(u, v);
    let wu = inv_sqrt(&suu);
    let wv = inv_sqrt(&svv);
    // Var(u)^-1/2 Cov(u,v) Var(v)^-1/2, whose Gram form is the target matrix
    let b = &wu * suv * &wv;
    let mut m = &b * b.transpose();
    m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let top = eig.eigenvalues.max();
    if !(top > 0.0) {
        return Ok(MultipleCorrelation {
            value: 0.0,
            eigenvalues: Vec::new(),
            degenerate: false,
        });
    }
    let mut nonzero: Vec<f64> = eig
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > NONZERO_REL * top)
        .map(|l| l.clamp(0.0, 1.0))
        .collect();
    nonzero.sort_by(|a, b| b.total_cmp(a));
    let value = nonzero.iter().sum::<f64>() / nonzero.len() as f64;
    Ok(MultipleCorrelation {
        value,
        eigenvalues: nonzero,
        degenerate: false,
    })
}

/// Mean absolute prediction error.
pub fn pmae(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_dim("pmae lengths", y_true.len(), y_pred.len())?;
    if y_true.is_empty() {
        return Err(Error::invalid("pmae of empty vectors"));
    }
    Ok(y_true
        .iter()
        .zip(y_pred)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / y_true.len() as f64)
}
