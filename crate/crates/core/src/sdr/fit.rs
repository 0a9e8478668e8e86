use nalgebra::DMatrix;

use super::ksir::ksir_with_basis;
use super::objective::{projected_bandwidths, EstimatorObjective, ObjectiveInputs, SpectralBasis};
use super::optimize::{minimize, MinimizeOptions};
use super::{FitConfig, FitResult, Method};
use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::kernels::{center_gram, default_kernel, gram};
use crate::smoothing::{nw_weights, SmootherSource};

/// Runs the full estimation pipeline: Gram matrix, centering, response
/// smoothers, KSIR start, then (unless `cfg.method` is KSIR) penalized
/// minimization of the selected objective.
pub fn fit(ds: &DataSet, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    if cfg.q >= ds.n() {
        return Err(Error::invalid(format!(
            "q = {} must be smaller than the sample size {}",
            cfg.q,
            ds.n()
        )));
    }
    let kernel = match cfg.kernel {
        Some(k) => k,
        None => default_kernel(ds.x())?,
    };
    let rraw = gram(ds.x(), &kernel)?;
    let rc = center_gram(&rraw)?;
    let basis = SpectralBasis::new(rc.entries());

    let y = DMatrix::from_column_slice(ds.n(), 1, ds.y().as_slice());
    let h1 = cfg.h1.resolve(&y)?;
    let h3 = cfg.h3.resolve(&y)?;
    let c0 = ksir_with_basis(rc.entries(), &basis, ds.y(), cfg.q, cfg.n_slices, cfg.ksir_ridge)?;

    if cfg.method == Method::Ksir {
        return Ok(FitResult {
            c: c0.clone(),
            objective_trace: Vec::new(),
            lambda_used: cfg.lambda,
            bandwidths_used: [h1, f64::NAN, h3],
            converged: true,
            iterations: 0,
            kernel,
            initial: c0,
            method: cfg.method,
        });
    }

    let k1 = nw_weights(&y, h1, SmootherSource::Response)?;
    let k3 = nw_weights(&y, h3, SmootherSource::Response)?;
    let (h2, h4) = projected_bandwidths(cfg, &c0, &rraw)?;
    let objective = EstimatorObjective::new(
        cfg.method,
        ObjectiveInputs {
            rraw: &rraw,
            basis: &basis,
            k1: &k1,
            k3: &k3,
            h2,
            h4,
        },
        cfg.lambda,
        cfg.gradient,
    )?;
    let opts = MinimizeOptions {
        max_iters: cfg.max_iters,
        tol: cfg.tol,
    };
    let m = minimize(&objective, c0.as_matrix(), &opts)?;
    let h2_final = objective.h2_at(&m.c);
    Ok(FitResult {
        c: super::CoefficientMatrix::new(m.c)?,
        objective_trace: m.trace,
        lambda_used: cfg.lambda,
        bandwidths_used: [h1, h2_final, h3],
        converged: m.converged,
        iterations: m.iterations,
        kernel,
        initial: c0,
        method: cfg.method,
    })
}
