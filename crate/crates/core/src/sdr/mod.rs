//! The estimators: KSIR and the penalized GS-KSIR-I, GS-KSIR-II and
//! GS-KSAVE fits.
//!
//! A direction `beta_j` in the feature space is represented through
//! coefficients `c_j` on the training points, so that the reduced
//! predictor of `x` is `C' R_(x)` with `R_(x)` the column of kernel values
//! between the training points and `x`.

mod fit;
mod ksir;
mod objective;
pub mod optimize;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::kernels::KernelSpec;
use crate::smoothing::BandwidthSpec;

pub use fit::fit;
pub use ksir::{ksir_init, quantile_slices};
pub use objective::{
    gsksave_factors, gsksave_objective, gsksave_residual, gsksir1_objective, gsksir1_residual,
    gsksir2_objective, gsksir2_residual, projected_features, projected_smoother, EstimatorObjective,
    ObjectiveInputs, SpectralBasis,
};

pub use optimize::{minimize, MinimizeOptions, Minimum, Objective};

/// `n x q` representer coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix(DMatrix<f64>);

impl CoefficientMatrix {
    pub fn new(c: DMatrix<f64>) -> Result<Self> {
        if c.ncols() == 0 || c.ncols() >= c.nrows() {
            return Err(Error::invalid(format!(
                "coefficient matrix must satisfy 1 <= q < n, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("coefficient matrix has non-finite entries"));
        }
        Ok(Self(c))
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn q(&self) -> usize {
        self.0.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Method {
    Ksir,
    #[default]
    Gsksir1,
    Gsksir2,
    Gsksave,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ksir, Method::Gsksir1, Method::Gsksir2, Method::Gsksave];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Ksir => "ksir",
            Method::Gsksir1 => "gsksir1",
            Method::Gsksir2 => "gsksir2",
            Method::Gsksave => "gsksave",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}'")))
    }
}

/// Bandwidth of a projected-feature smoother inside an objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectedBandwidth {
    Fixed(f64),
    /// Re-selected by the default rule on the current projected features
    /// at every evaluation.
    Adaptive,
}

/// How the optimizer obtains gradients of the penalized objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMode {
    /// Closed-form differentiation through the smoother weights.
    #[default]
    Analytic,
    /// Central differences on every coefficient.
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Reduced dimension.
    pub q: usize,
    /// Weight of the `tr(C'C)` penalty.
    pub lambda: f64,
    /// Response-side smoother bandwidth.
    pub h1: BandwidthSpec,
    /// Projected-feature smoother bandwidth; resolved once at the KSIR
    /// start and held fixed while optimizing.
    pub h2: BandwidthSpec,
    /// Second response-side bandwidth (GS-KSIR-II, GS-KSAVE).
    pub h3: BandwidthSpec,
    /// Second projected-feature bandwidth (GS-KSAVE); `Auto` reuses `h2`.
    pub h4: BandwidthSpec,
    pub method: Method,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    /// Reproducing kernel; `None` selects a gaussian kernel with the
    /// median-heuristic scale of the predictors.
    pub kernel: Option<KernelSpec>,
    pub n_slices: usize,
    pub ksir_ridge: f64,
    pub gradient: GradientMode,
    /// With `h2` automatic: re-select it on the current projected features
    /// at every evaluation (`true`) or once at the KSIR start (`false`).
    pub adaptive_h2: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            q: 2,
            lambda: 1e-2,
            h1: BandwidthSpec::Auto,
            h2: BandwidthSpec::Auto,
            h3: BandwidthSpec::Auto,
            h4: BandwidthSpec::Auto,
            method: Method::Gsksir1,
            max_iters: 100,
            tol: 1e-6,
            seed: 0,
            kernel: None,
            n_slices: 10,
            ksir_ridge: 1e-3,
            gradient: GradientMode::Analytic,
            adaptive_h2: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::invalid("q must be positive"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be a nonnegative number"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be positive"));
        }
        if self.n_slices < 2 {
            return Err(Error::invalid("n_slices must be at least 2"));
        }
        if !(self.ksir_ridge > 0.0) {
            return Err(Error::invalid("ksir_ridge must be positive"));
        }
        for b in [self.h1, self.h2, self.h3, self.h4] {
            b.validate()?;
        }
        if let Some(k) = &self.kernel {
            k.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub c: CoefficientMatrix,
    /// Objective at the KSIR start followed by one value per accepted
    /// step; empty for plain KSIR.
    pub objective_trace: Vec<f64>,
    pub lambda_used: f64,
    /// `(h1, h2, h3)`; `h2` is NaN for plain KSIR, which never smooths
    /// over projected features.
    pub bandwidths_used: [f64; 3],
    pub converged: bool,
    pub iterations: usize,
    /// Kernel the coefficients refer to; new points must be embedded with
    /// the same kernel.
    pub kernel: KernelSpec,
    /// The KSIR starting point.
    pub initial: CoefficientMatrix,
    pub method: Method,
}

impl FitResult {
    pub fn q(&self) -> usize {
        self.c.q()
    }
}

/// Reduced predictors of new points: `C' R_cross`, where `R_cross` holds
/// kernel values between training points (rows) and new points (columns).
pub fn transform(fit: &FitResult, r_cross: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim("transform: cross-kernel rows", fit.c.n(), r_cross.nrows())?;
    Ok(fit.c.as_matrix().tr_mul(r_cross))
}
