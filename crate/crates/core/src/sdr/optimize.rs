//! BFGS minimization over coefficient matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A scalar function of a matrix argument.
pub trait Objective {
    fn value(&self, c: &DMatrix<f64>) -> f64;

    /// Gradient with respect to every entry of `c`. Defaults to central
    /// finite differences.
    fn gradient(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        central_difference_gradient(|m| self.value(m), c)
    }
}

/// Adapter turning a closure into an [`Objective`] with a finite-difference
/// gradient.
pub struct FnObjective<F>(pub F);

impl<F: Fn(&DMatrix<f64>) -> f64> Objective for FnObjective<F> {
    fn value(&self, c: &DMatrix<f64>) -> f64 {
        (self.0)(c)
    }
}

/// Relative step used for central differences: `1e-5 * (1 + |x|)`.
pub const FD_RELATIVE_STEP: f64 = 1e-5;

pub fn central_difference_gradient<F>(f: F, c: &DMatrix<f64>) -> DMatrix<f64>
where
    F: Fn(&DMatrix<f64>) -> f64,
{
    let mut work = c.clone();
    let mut g = DMatrix::zeros(c.nrows(), c.ncols());
    for k in 0..c.len() {
        let x = c[k];
        let h = FD_RELATIVE_STEP * (1.0 + x.abs());
        work[k] = x + h;
        let up = f(&work);
        work[k] = x - h;
        let down = f(&work);
        work[k] = x;
        g[k] = (up - down) / (2.0 * h);
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// Stop once an accepted step lowers the objective by less than this
    /// fraction of its current value.
    pub tol: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

/// Result of [`minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub c: DMatrix<f64>,
    /// Objective at the start point followed by one value per accepted step.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

fn finite_or_err(v: f64, iteration: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::numeric(format!(
            "objective is not finite at iteration {iteration}"
        )))
    }
}

/// Minimizes `objective` from `c0` with BFGS and a halving Armijo line
/// search. Every accepted step strictly lowers the objective.
pub fn minimize<O: Objective + ?Sized>(
    objective: &O,
    c0: &DMatrix<f64>,
    opts: &MinimizeOptions,
) -> Result<Minimum> {
    if opts.max_iters == 0 || !(opts.tol > 0.0) {
        return Err(Error::invalid("max_iters must be >= 1 and tol > 0"));
    }
    let shape = c0.shape();
    let dim = c0.len();
    let to_mat = |v: &DVector<f64>| DMatrix::from_column_slice(shape.0, shape.1, v.as_slice());

    let mut x = DVector::from_column_slice(c0.as_slice());
    let mut fx = finite_or_err(objective.value(c0), 0)?;
    let mut g = DVector::from_column_slice(objective.gradient(c0).as_slice());
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("gradient is not finite at iteration 0"));
    }
    let mut hinv: Option<DMatrix<f64>> = None;
    let mut trace = vec![fx];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        let gnorm = g.norm();
        if gnorm <= 1e-14 * (1.0 + fx.abs()) {
            converged = true;
            break;
        }

        let mut step = None;
        // quasi-Newton direction first, steepest descent as the fallback
        let attempts: &[bool] = if hinv.is_some() { &[true, false] } else { &[false] };
        for &use_bfgs in attempts {
            let d = match (&hinv, use_bfgs) {
                (Some(h), true) => -(h * &g),
                _ => -&g,
            };
            let slope = g.dot(&d);
            if !(slope < 0.0) {
                hinv = None;
                continue;
            }
            let mut alpha = if use_bfgs {
                1.0
            } else {
                // keep the first gradient step on the scale of the iterate
                (0.1 * (1.0 + x.norm()) / d.norm()).min(1.0)
            };
            for _ in 0..MAX_HALVINGS {
                let trial = &x + alpha * &d;
                let ft = finite_or_err(objective.value(&to_mat(&trial)), iterations)?;
                if ft < fx && ft <= fx + ARMIJO_C * alpha * slope {
                    step = Some((trial, ft));
                    break;
                }
                alpha *= 0.5;
            }
            if step.is_some() {
                break;
            }
            hinv = None;
        }

        let Some((x_new, f_new)) = step else {
            // no descent along either direction: numerically stationary
            converged = true;
            iterations -= 1;
            break;
        };

        let g_new = DVector::from_column_slice(objective.gradient(&to_mat(&x_new)).as_slice());
        if g_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "gradient is not finite at iteration {iterations}"
            )));
        }
        let s = &x_new - &x;
        let yv = &g_new - &g;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            let h = hinv.take().unwrap_or_else(|| {
                DMatrix::identity(dim, dim) * (sy / yv.norm_squared())
            });
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            // H+ = H - rho (H y s' + s y' H) + (rho^2 y'Hy + rho) s s'
            let mut h_new = h;
            h_new.ger(-rho, &hy, &s, 1.0);
            h_new.ger(-rho, &s, &hy, 1.0);
            h_new.ger(rho * rho * yhy + rho, &s, &s, 1.0);
            hinv = Some(h_new);
        }

        let rel = (fx - f_new) / fx.abs().max(f64::MIN_POSITIVE);
        x = x_new;
        fx = f_new;
        g = g_new;
        trace.push(fx);
        if rel < opts.tol {
            converged = true;
            break;
        }
    }

    Ok(Minimum {
        c: to_mat(&x),
        trace,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn target() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 0.5, 3.0, -1.5, 0.25])
    }

    #[test]
    fn quadratic_converges_to_target() {
        let t = target();
        let obj = FnObjective(|c: &DMatrix<f64>| (c - &t).norm_squared());
        let opts = MinimizeOptions {
            max_iters: 50,
            tol: 1e-12,
        };
        let m = minimize(&obj, &DMatrix::zeros(3, 2), &opts).unwrap();
        assert!(m.iterations <= 50);
        assert!((m.c - t).amax() < 1e-4);
    }

    #[test]
    fn trace_strictly_decreases() {
        // an ill-conditioned quadratic forces several BFGS steps
        let obj = FnObjective(|c: &DMatrix<f64>| {
            let a = c[0] - 1.0;
            let b = c[1] + 2.0;
            100.0 * a * a + b * b + 0.5 * a * b + (c[2] * c[2]).powi(2)
        });
        let opts = MinimizeOptions {
            max_iters: 200,
            tol: 1e-14,
        };
        let m = minimize(&obj, &DMatrix::from_element(3, 1, 3.0), &opts).unwrap();
        assert!(m.trace.len() > 3);
        for w in m.trace.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn rosenbrock() {
        let obj = FnObjective(|c: &DMatrix<f64>| {
            (1.0 - c[0]).powi(2) + 100.0 * (c[1] - c[0] * c[0]).powi(2)
        });
        let opts = MinimizeOptions {
            max_iters: 500,
            tol: 1e-15,
        };
        let m = minimize(&obj, &DMatrix::from_row_slice(2, 1, &[-1.2, 1.0]), &opts).unwrap();
        assert_abs_diff_eq!(m.c[0], 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(m.c[1], 1.0, epsilon = 2e-3);
    }

    #[test]
    fn non_finite_objective_is_reported() {
        let obj = FnObjective(|c: &DMatrix<f64>| if c[0] > 0.5 { f64::NAN } else { -c[0] });
        let err = minimize(&obj, &DMatrix::zeros(1, 1), &MinimizeOptions::default()).unwrap_err();
        match err {
            Error::Numeric(msg) => assert!(msg.contains("not finite at iteration"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        let obj = FnObjective(|_: &DMatrix<f64>| f64::INFINITY);
        let err = minimize(&obj, &DMatrix::zeros(1, 1), &MinimizeOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Numeric(m) if m.contains("iteration 0")));
    }

    #[test]
    fn finite_difference_gradient_of_quadratic() {
        let t = target();
        let g = central_difference_gradient(|c| (c - &t).norm_squared(), &DMatrix::zeros(3, 2));
        assert_abs_diff_eq!(g, -2.0 * t, epsilon = 1e-6);
    }
}
