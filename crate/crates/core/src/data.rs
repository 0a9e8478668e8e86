use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

/// Predictors (one observation per row) together with the response.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl DataSet {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        check_dim("DataSet response length", x.nrows(), y.len())?;
        if x.nrows() < 2 {
            return Err(Error::invalid("a data set needs at least two observations"));
        }
        if x.ncols() == 0 {
            return Err(Error::invalid("a data set needs at least one predictor"));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("data contain non-finite values"));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Rows `idx` of the data, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let x = self.x.select_rows(idx.iter());
        let y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i]));
        Self::new(x, y)
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DVector<f64>) {
        (self.x, self.y)
    }
}

/// Per-column location and scale used to z-score predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardization {
    /// Column means and sample standard deviations. Constant columns get
    /// `sd = 0`; callers decide whether to drop them.
    pub fn from_columns(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut sd = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            mean.push(m);
            sd.push(var.sqrt());
        }
        Self { mean, sd }
    }

    /// Applies the z-score. Columns with zero spread are only centered.
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim("standardization columns", self.mean.len(), x.ncols())?;
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let s = if self.sd[j] > 0.0 { self.sd[j] } else { 1.0 };
            for v in col.iter_mut() {
                *v = (*v - self.mean[j]) / s;
            }
        }
        Ok(out)
    }
}

/// Z-scores every column of `x`, returning the scaled matrix and the
/// parameters used.
pub fn standardize(x: &DMatrix<f64>) -> (DMatrix<f64>, Standardization) {
    let st = Standardization::from_columns(x);
    let z = st.apply(x).expect("shape taken from the same matrix");
    (z, st)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_lengths() {
        let x = DMatrix::zeros(3, 2);
        let y = DVector::zeros(2);
        assert!(matches!(
            DataSet::new(x, y),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn standardized_columns_have_unit_sd() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 10.0, 2.0, 20.0, 3.0, 35.0, 4.0, 40.0]);
        let (z, _) = standardize(&x);
        let st = Standardization::from_columns(&z);
        for j in 0..2 {
            assert!(st.mean[j].abs() < 1e-12);
            assert!((st.sd[j] - 1.0).abs() < 1e-12);
        }
    }
}
