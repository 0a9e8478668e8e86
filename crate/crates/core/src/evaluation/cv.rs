use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kcca::{kcca_score, DEFAULT_KCCA_REG};
use super::metrics::pmae;
use super::ridge::{kernel_ridge_fit, kernel_ridge_predict, DEFAULT_RIDGE_REG};
use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::kernels::{cross_gram, gram};
use crate::sdr::{fit, transform, FitConfig};

/// Score used to rank candidate penalties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CvCriterion {
    /// Mean held-out KCCA between reduced predictors and response.
    #[default]
    Kcca,
    /// Held-out squared error of kernel ridge on the reduced predictors.
    Prediction,
}

impl CvCriterion {
    pub fn name(&self) -> &'static str {
        match self {
            CvCriterion::Kcca => "kcca",
            CvCriterion::Prediction => "prediction",
        }
    }
}

impl fmt::Display for CvCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CvCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kcca" => Ok(CvCriterion::Kcca),
            "prediction" => Ok(CvCriterion::Prediction),
            _ => Err(Error::invalid(format!("unknown criterion '{s}'"))),
        }
    }
}

/// Regularization used inside the cross-validation scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvSettings {
    pub kcca_reg: f64,
    pub ridge_reg: f64,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self {
            kcca_reg: DEFAULT_KCCA_REG,
            ridge_reg: DEFAULT_RIDGE_REG,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub lambda_grid: Vec<f64>,
    /// Mean KCCA, or negative mean squared prediction error, per penalty.
    pub scores: Vec<f64>,
    pub best_lambda: f64,
    pub fold_count: usize,
    pub criterion: CvCriterion,
}

/// Fold label for every observation. Observations are ranked by response
/// and each run of `k` consecutive ranks receives a random arrangement of
/// distinct folds, so every fold spans the response range.
pub fn stratified_folds(y: &[f64], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::invalid("cross-validation needs at least two folds"));
    }
    if k > y.len() {
        return Err(Error::invalid(format!(
            "{k} folds requested for {} observations",
            y.len()
        )));
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = vec![0; y.len()];
    let mut perm: Vec<usize> = (0..k).collect();
    for block in order.chunks(k) {
        perm.shuffle(&mut rng);
        for (&i, &f) in block.iter().zip(&perm) {
            labels[i] = f;
        }
    }
    Ok(labels)
}

struct Split {
    train: Vec<usize>,
    test: Vec<usize>,
}

fn splits(ds: &DataSet, k: usize, seed: u64, min_fold: usize) -> Result<Vec<Split>> {
    let y: Vec<f64> = ds.y().iter().copied().collect();
    let labels = stratified_folds(&y, k, seed)?;
    let mut out = Vec::with_capacity(k);
    for f in 0..k {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..ds.n()).partition(|&i| labels[i] == f);
        if test.len() < min_fold {
            return Err(Error::invalid(format!(
                "fold {f} holds {} points; at least {min_fold} are needed",
                test.len()
            )));
        }
        out.push(Split { train, test });
    }
    Ok(out)
}

/// Reduced predictors of the training and held-out parts of one split.
fn fold_embedding(
    ds: &DataSet,
    cfg: &FitConfig,
    split: &Split,
) -> Result<(DataSet, DataSet, DMatrix<f64>, DMatrix<f64>)> {
    let train = ds.subset(&split.train)?;
    let test = ds.subset(&split.test)?;
    let f = fit(&train, cfg)?;
    let r_train = gram(train.x(), &f.kernel)?;
    let u_train = transform(&f, r_train.entries())?;
    let u_test = transform(&f, &cross_gram(train.x(), test.x(), &f.kernel)?)?;
    Ok((train, test, u_train, u_test))
}

fn as_vec(v: &nalgebra::DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Chooses the penalty by `k`-fold cross-validation with default score
/// settings.
pub fn cv_select_lambda(
    ds: &DataSet,
    cfg: &FitConfig,
    grid: &[f64],
    k: usize,
    criterion: CvCriterion,
) -> Result<CvReport> {
    cv_select_lambda_with(ds, cfg, grid, k, criterion, &CvSettings::default())
}

/// Chooses the penalty by `k`-fold cross-validation. Folds are drawn once
/// from `cfg.seed` and shared by every grid point. Ties go to the smaller
/// penalty.
pub fn cv_select_lambda_with(
    ds: &DataSet,
    cfg: &FitConfig,
    grid: &[f64],
    k: usize,
    criterion: CvCriterion,
    settings: &CvSettings,
) -> Result<CvReport> {
    if grid.is_empty() {
        return Err(Error::invalid("lambda grid is empty"));
    }
    if let Some(l) = grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::invalid(format!("lambda grid holds an invalid value {l}")));
    }
    let folds = splits(ds, k, cfg.seed, (cfg.q + 2).max(5))?;
    let mut scores = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let c = FitConfig {
            lambda,
            ..cfg.clone()
        };
        let mut acc = 0.0;
        for split in &folds {
            let (train, test, u_train, u_test) = fold_embedding(ds, &c, split)?;
            acc += match criterion {
                CvCriterion::Kcca => kcca_score(&u_test, &as_vec(test.y()), settings.kcca_reg)?,
                CvCriterion::Prediction => {
                    let model = kernel_ridge_fit(&u_train, &as_vec(train.y()), settings.ridge_reg)?;
                    let pred = kernel_ridge_predict(&model, &u_test)?;
                    -test
                        .y()
                        .iter()
                        .zip(&pred)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                }
            };
        }
        let denom = match criterion {
            CvCriterion::Kcca => folds.len(),
            CvCriterion::Prediction => ds.n(),
        };
        scores.push(acc / denom as f64);
    }
    let mut best = 0;
    for i in 1..grid.len() {
        if scores[i] > scores[best] || (scores[i] == scores[best] && grid[i] < grid[best]) {
            best = i;
        }
    }
    Ok(CvReport {
        lambda_grid: grid.to_vec(),
        best_lambda: grid[best],
        scores,
        fold_count: k,
        criterion,
    })
}

/// Outcome of [`prediction_cv`].
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionReport {
    pub fold_pmae: Vec<f64>,
    pub mean_pmae: f64,
    /// PMAE of predicting every held-out point by the training mean.
    pub baseline_fold_pmae: Vec<f64>,
    pub baseline_mean_pmae: f64,
}

/// Fit, embed, regress by kernel ridge and score by PMAE on each of `k`
/// stratified folds.
pub fn prediction_cv(ds: &DataSet, cfg: &FitConfig, k: usize, ridge_reg: f64) -> Result<PredictionReport> {
    let folds = splits(ds, k, cfg.seed, 1)?;
    let mut fold_pmae = Vec::with_capacity(k);
    let mut baseline_fold_pmae = Vec::with_capacity(k);
    for split in &folds {
        let (train, test, u_train, u_test) = fold_embedding(ds, cfg, split)?;
        let y_train = as_vec(train.y());
        let y_test = as_vec(test.y());
        let model = kernel_ridge_fit(&u_train, &y_train, ridge_reg)?;
        fold_pmae.push(pmae(&y_test, &kernel_ridge_predict(&model, &u_test)?)?);
        let mean = y_train.iter().sum::<f64>() / y_train.len() as f64;
        baseline_fold_pmae.push(pmae(&y_test, &vec![mean; y_test.len()])?);
    }
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(PredictionReport {
        mean_pmae: avg(&fold_pmae),
        baseline_mean_pmae: avg(&baseline_fold_pmae),
        fold_pmae,
        baseline_fold_pmae,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdr::Method;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};

    fn toy(n: usize, seed: u64) -> DataSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::<f64>::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(n, |i, _| x[(i, 0)] + 0.5 * x[(i, 1)].powi(2));
        DataSet::new(x, y).unwrap()
    }

    #[test]
    fn folds_are_balanced_and_stratified() {
        let y: Vec<f64> = (0..23).map(|i| (i * 7 % 23) as f64).collect();
        let labels = stratified_folds(&y, 5, 3).unwrap();
        let mut sizes = [0; 5];
        for &l in &labels {
            sizes[l] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 4 || s == 5), "{sizes:?}");
        // the lowest five responses land in five different folds
        let mut low: Vec<usize> = (0..23).filter(|&i| y[i] < 5.0).map(|i| labels[i]).collect();
        low.sort();
        assert_eq!(low, vec![0, 1, 2, 3, 4]);
        assert_eq!(labels, stratified_folds(&y, 5, 3).unwrap());
    }

    #[test]
    fn single_point_grid() {
        let ds = toy(40, 1);
        let cfg = FitConfig {
            method: Method::Ksir,
            ..Default::default()
        };
        let r = cv_select_lambda(&ds, &cfg, &[0.3], 4, CvCriterion::Kcca).unwrap();
        assert_eq!(r.best_lambda, 0.3);
        assert_eq!(r.scores.len(), 1);
        assert_eq!(r.fold_count, 4);
    }

    #[test]
    fn ties_go_to_the_smaller_lambda() {
        // KSIR ignores the penalty, so every grid point scores the same
        let ds = toy(40, 2);
        let cfg = FitConfig {
            method: Method::Ksir,
            ..Default::default()
        };
        let r = cv_select_lambda(&ds, &cfg, &[1.0, 0.01, 0.1], 4, CvCriterion::Prediction).unwrap();
        assert_eq!(r.scores.len(), 3);
        assert_eq!(r.best_lambda, 0.01);
        assert!(r.scores.iter().all(|s| *s <= 0.0));
    }

    #[test]
    fn small_folds_are_rejected() {
        let ds = toy(12, 3);
        let err = cv_select_lambda(&ds, &FitConfig::default(), &[0.1], 4, CvCriterion::Kcca);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
        assert!(cv_select_lambda(&ds, &FitConfig::default(), &[], 2, CvCriterion::Kcca).is_err());
    }

    #[test]
    fn criterion_round_trips() {
        for c in [CvCriterion::Kcca, CvCriterion::Prediction] {
            assert_eq!(c.to_string().parse::<CvCriterion>().unwrap(), c);
        }
        assert!("mse".parse::<CvCriterion>().is_err());
    }
}
