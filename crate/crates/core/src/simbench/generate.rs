//! Seeded generators for the three simulation designs.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erfc;

use crate::data::DataSet;
use crate::error::{Error, Result};

/// Number of covariates that enter the response in every design.
pub const STRUCTURAL_COVARIATES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseId {
    /// Nonlinear index, non-elliptical covariates.
    Case1,
    /// Nonlinear index, gaussian covariates.
    Case2,
    /// Linear index, non-elliptical covariates.
    Case3,
}

impl CaseId {
    pub const ALL: [CaseId; 3] = [CaseId::Case1, CaseId::Case2, CaseId::Case3];

    pub fn name(&self) -> &'static str {
        match self {
            CaseId::Case1 => "case1",
            CaseId::Case2 => "case2",
            CaseId::Case3 => "case3",
        }
    }

    fn stream(&self) -> u64 {
        match self {
            CaseId::Case1 => 1,
            CaseId::Case2 => 2,
            CaseId::Case3 => 3,
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "case1" | "1" => Ok(CaseId::Case1),
            "case2" | "2" => Ok(CaseId::Case2),
            "case3" | "3" => Ok(CaseId::Case3),
            _ => Err(Error::invalid(format!("unknown simulation case '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimCase {
    pub case_id: CaseId,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
}

impl SimCase {
    pub fn new(case_id: CaseId, n: usize, p: usize, seed: u64) -> Result<Self> {
        let c = Self { case_id, n, p, seed };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < STRUCTURAL_COVARIATES {
            return Err(Error::invalid(format!(
                "simulation designs need p >= {STRUCTURAL_COVARIATES}, got {}",
                self.p
            )));
        }
        if self.n < 2 {
            return Err(Error::invalid("simulation needs n >= 2"));
        }
        Ok(())
    }
}

/// A simulated sample with the two true index functions (`2 x n`).
#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    pub data: DataSet,
    pub u_true: DMatrix<f64>,
}

/// Lower Cholesky factor of the AR(1) correlation `rho^|i-j|`.
fn ar1_cholesky(dim: usize, rho: f64) -> DMatrix<f64> {
    let sigma = DMatrix::from_fn(dim, dim, |i, j| rho.powi((i as i32 - j as i32).abs()));
    sigma
        .cholesky()
        .expect("AR(1) correlation with |rho| < 1 is positive definite")
        .l()
}

fn correlated_normals(rng: &mut ChaCha8Rng, l: &DMatrix<f64>) -> DVector<f64> {
    let z = DVector::from_fn(l.nrows(), |_, _| StandardNormal.sample(rng));
    l * z
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn bernoulli(rng: &mut ChaCha8Rng, prob: f64) -> f64 {
    let u: f64 = rng.random();
    if u < prob {
        1.0
    } else {
        0.0
    }
}

/// Rows of the non-elliptical design shared by cases 1 and 3.
fn non_elliptical_row(rng: &mut ChaCha8Rng, l4: &DMatrix<f64>, l_extra: Option<&DMatrix<f64>>, row: &mut [f64]) {
    let head = correlated_normals(rng, l4);
    let e: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
    let (x1, x2, x3, x4) = (head[0], head[1], head[2], head[3]);
    row[0] = x1;
    row[1] = x2;
    row[2] = x3;
    row[3] = x4;
    row[4] = (x1 + x2).abs() + x1.abs() * e[0];
    row[5] = (x1 + x2).powi(2) + x2.abs() * e[1];
    row[6] = bernoulli(rng, 1.0 / (1.0 + (-x2).exp()));
    row[7] = bernoulli(rng, normal_cdf(x2));
    row[8] = x3.powi(3) - 2.0 * x4.abs() + x3.abs() * e[2];
    row[9] = (x3 + x4).powi(2) + x4.abs() * e[3];
    if let Some(l) = l_extra {
        let extra = correlated_normals(rng, l);
        row[STRUCTURAL_COVARIATES..].copy_from_slice(extra.as_slice());
    }
}

/// The two index functions `sum_i s_i f(x_i)` over the structural
/// covariates with signs all `+` and alternating `(-1)^(i+1)`.
fn indices(row: &[f64], f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut plain = 0.0;
    let mut alternating = 0.0;
    for (i, &x) in row[..STRUCTURAL_COVARIATES].iter().enumerate() {
        let v = f(x);
        plain += v;
        alternating += if i % 2 == 0 { v } else { -v };
    }
    (plain, alternating)
}

/// Covariates, response and true indices before any finiteness check.
/// The case 1 response contains `exp` of a sum of squared, partly cubic,
/// covariates and can overflow to infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub u_true: DMatrix<f64>,
}

/// Draws a sample from `case`. Bit-deterministic per `(case_id, n, p, seed)`.
/// A response that overflows is reported as a numeric error.
pub fn generate(case: &SimCase) -> Result<SimData> {
    generate_with_noise(case, 1.0)
}

/// As [`generate`], with the response noise multiplied by `noise_scale`
/// (0 gives the noiseless response; covariates are unchanged).
pub fn generate_with_noise(case: &SimCase, noise_scale: f64) -> Result<SimData> {
    let raw = generate_raw(case, noise_scale)?;
    if let Some(i) = raw.y.iter().position(|v| !v.is_finite()) {
        return Err(Error::numeric(format!(
            "simulated response overflowed at observation {i} ({} seed {})",
            case.case_id, case.seed
        )));
    }
    Ok(SimData {
        data: DataSet::new(raw.x, raw.y)?,
        u_true: raw.u_true,
    })
}

/// The unchecked draw behind [`generate_with_noise`].
pub fn generate_raw(case: &SimCase, noise_scale: f64) -> Result<RawSample> {
    case.validate()?;
    let SimCase { case_id, n, p, seed } = *case;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(case_id.stream());

    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    let mut u = DMatrix::zeros(2, n);
    let mut row = vec![0.0; p];
    let extra = p - STRUCTURAL_COVARIATES;

    match case_id {
        CaseId::Case1 | CaseId::Case3 => {
            let l4 = ar1_cholesky(4, 0.5);
            let l_extra = (extra > 0).then(|| ar1_cholesky(extra, 0.6));
            for i in 0..n {
                non_elliptical_row(&mut rng, &l4, l_extra.as_ref(), &mut row);
                let eps: f64 = StandardNormal.sample(&mut rng);
                let (u1, u2, yi) = if case_id == CaseId::Case1 {
                    let (u1, u2) = indices(&row, |v| v * v);
                    (u1, u2, u1.abs() + 2.0 * u2.exp() + 0.1 * noise_scale * eps)
                } else {
                    let (u1, u2) = indices(&row, |v| v);
                    (u1, u2, u1 * u1 + u2 * u2 + 0.5 * noise_scale * eps)
                };
                x.row_mut(i).copy_from_slice(&row);
                y[i] = yi;
                u[(0, i)] = u1;
                u[(1, i)] = u2;
            }
        }
        CaseId::Case2 => {
            let l = ar1_cholesky(p, 0.8);
            for i in 0..n {
                let xi = correlated_normals(&mut rng, &l);
                let eps: f64 = StandardNormal.sample(&mut rng);
                let (u1, u2) = indices(xi.as_slice(), |v| v * v);
                x.row_mut(i).copy_from_slice(xi.as_slice());
                y[i] = u1.abs() * u2 + 0.5 * noise_scale * eps;
                u[(0, i)] = u1;
                u[(1, i)] = u2;
            }
        }
    }
    Ok(RawSample { x, y, u_true: u })
}
