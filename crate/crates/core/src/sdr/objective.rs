//! Penalized estimating-equation objectives.
//!
//! Two evaluation routes exist for every objective:
//!
//! * the dense reference functions ([`gsksir1_objective`] and friends)
//!   form the `n x n` matrix products literally, and
//! * [`EstimatorObjective`] evaluates the same quantity through the
//!   eigenbasis of the centered Gram matrix, and differentiates it in
//!   closed form with respect to the projected features `Z = C' R`.
//!
//! The optimizer uses the second; tests hold it to the first.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::optimize::{central_difference_gradient, Objective};
use super::{CoefficientMatrix, FitConfig, GradientMode, Method, ProjectedBandwidth};
use crate::error::{check_dim, Error, Result};
use crate::kernels::GramMatrix;
use crate::smoothing::{
    bandwidth_factor, default_bandwidth, epanechnikov_1d, epanechnikov_1d_deriv, normalize_columns,
    product_kernel_weights, robust_scale_with_gradient, BandwidthSpec, SmootherMatrix,
    SmootherSource,
};

/// Column `i` is `C' R_(i)`: the reduced predictor of observation `i`.
pub fn projected_features(c: &CoefficientMatrix, r: &GramMatrix) -> Result<DMatrix<f64>> {
    check_dim("projected features: Gram size", c.n(), r.n())?;
    Ok(c.as_matrix().tr_mul(r.entries()))
}

fn rows_of(z: &DMatrix<f64>) -> Vec<Vec<f64>> {
    z.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Bandwidth for smoothing over projected features `z` (`q x n`).
/// Coinciding features smooth to uniform weights whatever the bandwidth,
/// so that case resolves to 1.
pub(crate) fn projected_bandwidth(spec: &BandwidthSpec, z: &DMatrix<f64>) -> Result<f64> {
    match spec.resolve(&z.transpose()) {
        Err(Error::Degenerate(_)) => Ok(1.0),
        other => other,
    }
}

/// Nadaraya-Watson smoother over the projected features of `c`.
pub fn projected_smoother(c: &CoefficientMatrix, rraw: &GramMatrix, h: f64) -> Result<SmootherMatrix> {
    let z = projected_features(c, rraw)?;
    crate::smoothing::nw_weights(&z.transpose(), h, SmootherSource::ProjectedFeatures)
}

fn check_square(context: &'static str, n: usize, m: &DMatrix<f64>) -> Result<()> {
    check_dim(context, n, m.nrows())?;
    check_dim(context, n, m.ncols())
}

/// `|| R~ K1 (I - K2)(I - K2)' R~ ||_F^2`
pub fn gsksir1_residual(rc: &DMatrix<f64>, k1: &DMatrix<f64>, k2: &DMatrix<f64>) -> Result<f64> {
    let n = rc.nrows();
    check_square("gsksir1 residual", n, rc)?;
    check_square("gsksir1 residual", n, k1)?;
    check_square("gsksir1 residual", n, k2)?;
    let m = DMatrix::identity(n, n) - k2;
    let inner = rc * k1 * &m * m.transpose() * rc;
    Ok(inner.norm_squared())
}

/// `|| R~ (K1 - K2 K3)(K1 - K2 K3)' R~ ||_F^2`
pub fn gsksir2_residual(
    rc: &DMatrix<f64>,
    k1: &DMatrix<f64>,
    k2: &DMatrix<f64>,
    k3: &DMatrix<f64>,
) -> Result<f64> {
    let n = rc.nrows();
    for m in [rc, k1, k2, k3] {
        check_square("gsksir2 residual", n, m)?;
    }
    let e = k1 - k2 * k3;
    let inner = rc * &e * e.transpose() * rc;
    Ok(inner.norm_squared())
}

/// The two factors of the sliced-average-variance estimating equation,
/// `a = D1 - K_h3' diag(R)` and `b = D2 - K_h4' diag(R)`, with
///
/// ```text
/// D1 = diag(I + K1' R K1)
/// D2 = diag(R - R K1 - R K2 + K1' R K2x + K2' R K2)
/// ```
///
/// where `K2x` is the projected-feature smoother taken at the response
/// bandwidth, exactly as the subscripts of the estimating equation read.
pub fn gsksave_factors(
    rraw: &DMatrix<f64>,
    k1: &DMatrix<f64>,
    k3: &DMatrix<f64>,
    k2: &DMatrix<f64>,
    k2x: &DMatrix<f64>,
    k4: &DMatrix<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = rraw.nrows();
    for m in [rraw, k1, k3, k2, k2x, k4] {
        check_square("gsksave factors", n, m)?;
    }
    let d = rraw.diagonal();
    let d1 = (k1.transpose() * rraw * k1).diagonal().add_scalar(1.0);
    let d2 = (rraw - rraw * k1 - rraw * k2 + k1.transpose() * rraw * k2x + k2.transpose() * rraw * k2)
        .diagonal();
    let a = d1 - k3.tr_mul(&d);
    let b = d2 - k4.tr_mul(&d);
    Ok((a, b))
}

/// Squared Frobenius norm of the rank-one residual `a b'`.
pub fn gsksave_residual(
    rraw: &DMatrix<f64>,
    k1: &DMatrix<f64>,
    k3: &DMatrix<f64>,
    k2: &DMatrix<f64>,
    k2x: &DMatrix<f64>,
    k4: &DMatrix<f64>,
) -> Result<f64> {
    let (a, b) = gsksave_factors(rraw, k1, k3, k2, k2x, k4)?;
    Ok((&a * b.transpose()).norm_squared())
}

fn require_centered(rc: &GramMatrix) -> Result<()> {
    if rc.is_centered() {
        Ok(())
    } else {
        Err(Error::invalid("objective needs the centered Gram matrix"))
    }
}

fn penalty(c: &CoefficientMatrix, lambda: f64) -> f64 {
    lambda * c.as_matrix().norm_squared()
}

/// GS-KSIR-I objective
/// `|| R~ K1 (I - K2)(I - K2)' R~ ||^2 + lambda tr(C'C)`, with `K2`
/// recomputed from the projected features of `c`.
pub fn gsksir1_objective(
    c: &CoefficientMatrix,
    rc: &GramMatrix,
    rraw: &GramMatrix,
    k1: &SmootherMatrix,
    cfg: &FitConfig,
) -> Result<f64> {
    require_centered(rc)?;
    let z = projected_features(c, rraw)?;
    let h2 = projected_bandwidth(&cfg.h2, &z)?;
    let k2 = projected_smoother(c, rraw, h2)?;
    Ok(gsksir1_residual(rc.entries(), k1.weights(), k2.weights())? + penalty(c, cfg.lambda))
}

/// GS-KSIR-II objective
/// `|| R~ (K1 - K2 K3)(K1 - K2 K3)' R~ ||^2 + lambda tr(C'C)`.
pub fn gsksir2_objective(
    c: &CoefficientMatrix,
    rc: &GramMatrix,
    rraw: &GramMatrix,
    k1: &SmootherMatrix,
    k3: &SmootherMatrix,
    cfg: &FitConfig,
) -> Result<f64> {
    require_centered(rc)?;
    let z = projected_features(c, rraw)?;
    let h2 = projected_bandwidth(&cfg.h2, &z)?;
    let k2 = projected_smoother(c, rraw, h2)?;
    Ok(gsksir2_residual(rc.entries(), k1.weights(), k2.weights(), k3.weights())?
        + penalty(c, cfg.lambda))
}

/// GS-KSAVE objective `||a b'||^2 + lambda tr(C'C)` (see
/// [`gsksave_factors`]). `k3` is the response smoother at `h3`; the
/// projected smoothers use `h2`, `h4` and the bandwidth of `k1`.
pub fn gsksave_objective(
    c: &CoefficientMatrix,
    rraw: &GramMatrix,
    k1: &SmootherMatrix,
    k3: &SmootherMatrix,
    cfg: &FitConfig,
) -> Result<f64> {
    if rraw.is_centered() {
        return Err(Error::invalid("GS-KSAVE works on the raw Gram matrix"));
    }
    let z = projected_features(c, rraw)?;
    let h2 = projected_bandwidth(&cfg.h2, &z)?;
    let h4 = projected_bandwidth(&cfg.h4, &z)?;
    let k2 = projected_smoother(c, rraw, h2)?;
    let k2x = projected_smoother(c, rraw, k1.bandwidth())?;
    let k4 = projected_smoother(c, rraw, h4)?;
    Ok(gsksave_residual(
        rraw.entries(),
        k1.weights(),
        k3.weights(),
        k2.weights(),
        k2x.weights(),
        k4.weights(),
    )? + penalty(c, cfg.lambda))
}

/// Eigen-decomposition of a centered Gram matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SpectralBasis {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(m.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
        let vectors = eig.eigenvectors.select_columns(order.iter());
        Self { values, vectors }
    }

    /// `V_r diag(values_r)` over eigenvalues above `rel_tol * max`.
    pub fn scaled_leading(&self, rel_tol: f64) -> DMatrix<f64> {
        let top = self.values.max().max(0.0);
        let r = self.values.iter().take_while(|&&v| v > rel_tol * top).count();
        let mut p = self.vectors.columns(0, r).into_owned();
        for (j, mut col) in p.column_iter_mut().enumerate() {
            col *= self.values[j];
        }
        p
    }
}

/// Relative eigenvalue cut-off for the spectral route. Dropped directions
/// enter the residual with weight below `1e-7 * lambda_max` per factor.
const SPECTRAL_TOL: f64 = 1e-7;

enum Parts {
    Gsksir1 {
        p: DMatrix<f64>,
        q1: DMatrix<f64>,
    },
    Gsksir2 {
        p: DMatrix<f64>,
        q1: DMatrix<f64>,
        k3: DMatrix<f64>,
    },
    Gsksave {
        d: DVector<f64>,
        a_norm2: f64,
        rk1_diag: DVector<f64>,
        k1t_r: DMatrix<f64>,
        h1: f64,
        h4: ProjectedBandwidth,
    },
}

/// Objective in the form consumed by the optimizer.
pub struct EstimatorObjective {
    rraw: DMatrix<f64>,
    lambda: f64,
    h2: ProjectedBandwidth,
    gradient: GradientMode,
    parts: Parts,
}

/// Projected-feature smoother in unnormalized form.
struct Smooth {
    w: DMatrix<f64>,
    sums: Vec<f64>,
    k: DMatrix<f64>,
}

impl Smooth {
    fn new(z: &[Vec<f64>], h: f64) -> Self {
        let (w, sums) = product_kernel_weights(z, h);
        let mut k = w.clone();
        normalize_columns(&mut k, &sums);
        Self { w, sums, k }
    }
}

/// Inputs shared by every estimator objective.
pub struct ObjectiveInputs<'a> {
    pub rraw: &'a GramMatrix,
    pub basis: &'a SpectralBasis,
    pub k1: &'a SmootherMatrix,
    pub k3: &'a SmootherMatrix,
    pub h2: ProjectedBandwidth,
    pub h4: ProjectedBandwidth,
}

impl EstimatorObjective {
    pub fn new(method: Method, inputs: ObjectiveInputs<'_>, lambda: f64, gradient: GradientMode) -> Result<Self> {
        let ObjectiveInputs {
            rraw,
            basis,
            k1,
            k3,
            h2,
            h4,
        } = inputs;
        let n = rraw.n();
        check_dim("objective: smoother size", n, k1.n())?;
        check_dim("objective: smoother size", n, k3.n())?;
        check_dim("objective: basis size", n, basis.vectors.nrows())?;
        let r = rraw.entries().clone();
        let parts = match method {
            Method::Gsksir1 => {
                let p = basis.scaled_leading(SPECTRAL_TOL);
                let q1 = k1.weights().tr_mul(&p);
                Parts::Gsksir1 { p, q1 }
            }
            Method::Gsksir2 => {
                let p = basis.scaled_leading(SPECTRAL_TOL);
                let q1 = k1.weights().tr_mul(&p);
                Parts::Gsksir2 {
                    p,
                    q1,
                    k3: k3.weights().clone(),
                }
            }
            Method::Gsksave => {
                let d = r.diagonal();
                let kw = k1.weights();
                let k1t_r = kw.tr_mul(&r);
                let d1 = (&k1t_r * kw).diagonal().add_scalar(1.0);
                let a = d1 - k3.weights().tr_mul(&d);
                let rk1_diag = (&r * kw).diagonal();
                Parts::Gsksave {
                    d,
                    a_norm2: a.norm_squared(),
                    rk1_diag,
                    k1t_r,
                    h1: k1.bandwidth(),
                    h4,
                }
            }
            Method::Ksir => {
                return Err(Error::invalid("KSIR has no penalized objective"));
            }
        };
        Ok(Self {
            rraw: r,
            lambda,
            h2,
            gradient,
            parts,
        })
    }

    /// The projected-feature bandwidth `h2` in effect at `c`.
    pub fn h2_at(&self, c: &DMatrix<f64>) -> f64 {
        match self.h2 {
            ProjectedBandwidth::Fixed(h) => h,
            ProjectedBandwidth::Adaptive => adaptive_bandwidth(&self.features(c), false).0,
        }
    }

    fn features(&self, c: &DMatrix<f64>) -> Vec<Vec<f64>> {
        rows_of(&c.tr_mul(&self.rraw))
    }

    /// Data term (without penalty) and, when requested, its gradient with
    /// respect to the projected features (`q x n`).
    fn data_term(&self, z: &[Vec<f64>], want_grad: bool) -> (f64, Option<Vec<Vec<f64>>>) {
        let n = self.rraw.nrows();
        let mut grad_z = want_grad.then(|| vec![vec![0.0; n]; z.len()]);
        let adaptive = (matches!(self.h2, ProjectedBandwidth::Adaptive)
            || matches!(&self.parts, Parts::Gsksave { h4: ProjectedBandwidth::Adaptive, .. }))
        .then(|| adaptive_bandwidth(z, want_grad));
        let resolve = |b: ProjectedBandwidth| match (b, &adaptive) {
            (ProjectedBandwidth::Fixed(h), _) => (h, false),
            (ProjectedBandwidth::Adaptive, Some((h, _))) => (*h, true),
            (ProjectedBandwidth::Adaptive, None) => unreachable!("adaptive bandwidth computed above"),
        };
        // accumulated dF/dh over every smoother whose bandwidth follows z
        let mut dh_total = 0.0;
        let (h2, h2_adaptive) = resolve(self.h2);
        let s2 = Smooth::new(z, h2);
        let value = match &self.parts {
            Parts::Gsksir1 { p, q1 } => {
                let g = q1 - s2.k.tr_mul(q1);
                let hm = p - s2.k.tr_mul(p);
                let a = g.tr_mul(&hm);
                if let Some(gz) = grad_z.as_mut() {
                    // dF/dK2 = -2 (Q A H' + P A' G')
                    let gamma = (q1 * &a * hm.transpose() + p * a.tr_mul(&g.transpose())) * -2.0;
                    let dh = smoother_backprop(z, h2, &s2, &gamma, gz, h2_adaptive);
                    dh_total += dh;
                }
                a.norm_squared()
            }
            Parts::Gsksir2 { p, q1, k3 } => {
                let t = s2.k.tr_mul(p);
                let g = q1 - k3.tr_mul(&t);
                let a = g.tr_mul(&g);
                if let Some(gz) = grad_z.as_mut() {
                    // dF/dK2 = -4 P (K3 G A)'
                    let x = k3 * &g * &a;
                    let gamma = p * x.transpose() * -4.0;
                    dh_total += smoother_backprop(z, h2, &s2, &gamma, gz, h2_adaptive);
                }
                a.norm_squared()
            }
            Parts::Gsksave {
                d,
                a_norm2,
                rk1_diag,
                k1t_r,
                h1,
                h4,
            } => {
                let r = &self.rraw;
                let (h4, h4_adaptive) = resolve(*h4);
                let sx = Smooth::new(z, *h1);
                let s4 = Smooth::new(z, h4);
                let rk2 = r * &s2.k;
                let mut b = DVector::zeros(n);
                for i in 0..n {
                    let mut v = r[(i, i)] - rk1_diag[i] - rk2[(i, i)];
                    for l in 0..n {
                        v += k1t_r[(i, l)] * sx.k[(l, i)] + s2.k[(l, i)] * rk2[(l, i)];
                    }
                    v -= s4.k.column(i).dot(d);
                    b[i] = v;
                }
                let value = a_norm2 * b.norm_squared();
                if let Some(gz) = grad_z.as_mut() {
                    let s = 2.0 * a_norm2;
                    let g2 = DMatrix::from_fn(n, n, |l, i| s * b[i] * (2.0 * rk2[(l, i)] - r[(i, l)]));
                    let gx = DMatrix::from_fn(n, n, |l, i| s * b[i] * k1t_r[(i, l)]);
                    let g4 = DMatrix::from_fn(n, n, |l, i| -s * b[i] * d[l]);
                    dh_total += smoother_backprop(z, h2, &s2, &g2, gz, h2_adaptive);
                    smoother_backprop(z, *h1, &sx, &gx, gz, false);
                    dh_total += smoother_backprop(z, h4, &s4, &g4, gz, h4_adaptive);
                }
                value
            }
        };
        if let (Some(gz), Some((_, Some(dh_dz)))) = (grad_z.as_mut(), &adaptive) {
            for (row, drow) in gz.iter_mut().zip(dh_dz) {
                for (g, d) in row.iter_mut().zip(drow) {
                    *g += dh_total * d;
                }
            }
        }
        (value, grad_z)
    }

    /// Gradient with respect to `C`, computed analytically through the
    /// projected features: `dF/dC = R (dF/dZ)' + 2 lambda C`.
    pub fn analytic_gradient(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        let z = self.features(c);
        let (_, gz) = self.data_term(&z, true);
        let gz = gz.expect("gradient requested");
        let q = gz.len();
        let n = self.rraw.nrows();
        let gz_t = DMatrix::from_fn(n, q, |i, j| gz[j][i]);
        &self.rraw * gz_t + c * (2.0 * self.lambda)
    }
}

impl Objective for EstimatorObjective {
    fn value(&self, c: &DMatrix<f64>) -> f64 {
        let z = self.features(c);
        self.data_term(&z, false).0 + self.lambda * c.norm_squared()
    }

    fn gradient(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        match self.gradient {
            GradientMode::Analytic => self.analytic_gradient(c),
            GradientMode::FiniteDifference => central_difference_gradient(|m| self.value(m), c),
        }
    }
}

/// Accumulates `dF/dZ` into `grad_z` given `gamma = dF/dK` for the
/// column-normalized smoother `K = W diag(sums)^-1` built from `z` at
/// bandwidth `h`. Returns `dF/dh` when `want_dh` is set, 0 otherwise.
fn smoother_backprop(
    z: &[Vec<f64>],
    h: f64,
    s: &Smooth,
    gamma: &DMatrix<f64>,
    grad_z: &mut [Vec<f64>],
    want_dh: bool,
) -> f64 {
    let n = s.w.nrows();
    let q = z.len();
    // psi = dF/dW
    let mut psi = DMatrix::zeros(n, n);
    for b in 0..n {
        let sb = s.sums[b];
        if !(sb > 0.0 && sb.is_finite()) {
            continue;
        }
        let col_dot: f64 = (0..n).map(|a| gamma[(a, b)] * s.k[(a, b)]).sum();
        for a in 0..n {
            psi[(a, b)] = (gamma[(a, b)] - col_dot) / sb;
        }
    }
    let mut dh = 0.0;
    if want_dh {
        // dW_aa/dh = -q W_aa / h
        for a in 0..n {
            dh -= psi[(a, a)] * s.w[(a, a)] * q as f64 / h;
        }
    }
    let mut kv = vec![0.0; q];
    let mut dv = vec![0.0; q];
    for b in 0..n {
        for a in 0..b {
            let coef = psi[(a, b)] + psi[(b, a)];
            if coef == 0.0 {
                continue;
            }
            let mut inside = true;
            let mut log_dh = 0.0;
            for j in 0..q {
                let u = z[j][a] - z[j][b];
                if u.abs() >= h {
                    inside = false;
                    break;
                }
                kv[j] = epanechnikov_1d(u, h);
                dv[j] = epanechnikov_1d_deriv(u, h);
                let t2 = (u / h).powi(2);
                log_dh += (3.0 * t2 - 1.0) / (h * (1.0 - t2));
            }
            if !inside {
                continue;
            }
            if want_dh {
                dh += coef * s.w[(a, b)] * log_dh;
            }
            for j in 0..q {
                let others: f64 = (0..q).filter(|&m| m != j).map(|m| kv[m]).product();
                let dw = coef * dv[j] * others;
                grad_z[j][a] += dw;
                grad_z[j][b] -= dw;
            }
        }
    }
    dh
}

/// Default bandwidth over projected features `z` (`q` rows of length `n`)
/// and, optionally, its derivative with respect to every entry of `z`.
/// Features without spread resolve to bandwidth 1 with zero derivative.
fn adaptive_bandwidth(z: &[Vec<f64>], want_grad: bool) -> (f64, Option<Vec<Vec<f64>>>) {
    let q = z.len();
    let n = z.first().map_or(0, Vec::len);
    let factor = bandwidth_factor(n, q);
    let mut mean_scale = 0.0;
    let mut grads = Vec::with_capacity(q);
    for row in z {
        let (sc, g) = robust_scale_with_gradient(row);
        mean_scale += sc / q as f64;
        grads.push(g);
    }
    if !(mean_scale > 0.0 && mean_scale.is_finite()) {
        return (1.0, want_grad.then(|| vec![vec![0.0; n]; q]));
    }
    let grad = want_grad.then(|| {
        grads
            .into_iter()
            .map(|g| g.into_iter().map(|v| v * factor / q as f64).collect())
            .collect()
    });
    (factor * mean_scale, grad)
}

/// Resolves the projected-feature bandwidths for a fit starting at `c0`:
/// fixed values are used as given, automatic ones are either evaluated
/// once at `c0` or left to follow the features, per `cfg`.
pub(crate) fn projected_bandwidths(
    cfg: &FitConfig,
    c0: &CoefficientMatrix,
    rraw: &GramMatrix,
) -> Result<(ProjectedBandwidth, ProjectedBandwidth)> {
    let z0 = projected_features(c0, rraw)?;
    let h2 = match cfg.h2 {
        BandwidthSpec::Fixed(h) => ProjectedBandwidth::Fixed(h),
        BandwidthSpec::Auto if cfg.adaptive_h2 => ProjectedBandwidth::Adaptive,
        BandwidthSpec::Auto => ProjectedBandwidth::Fixed(default_bandwidth(&z0.transpose())?),
    };
    let h4 = match cfg.h4 {
        BandwidthSpec::Fixed(h) => ProjectedBandwidth::Fixed(h),
        BandwidthSpec::Auto => h2,
    };
    Ok((h2, h4))
}
