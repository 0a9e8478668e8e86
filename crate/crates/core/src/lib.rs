//! Nonlinear sufficient dimension reduction in a reproducing kernel
//! Hilbert space.
//!
//! The crate estimates `q` nonlinear predictors `u_j = <beta_j, phi(x)>`
//! such that the response depends on `x` only through them. Besides the
//! kernel sliced inverse regression baseline it provides three penalized
//! estimating-equation fits (GS-KSIR-I, GS-KSIR-II, GS-KSAVE), λ
//! cross-validation, evaluation metrics and the simulation designs used
//! to compare them.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod format;
pub mod kernels;
pub mod sdr;
pub mod simbench;
pub mod smoothing;

pub use data::DataSet;
pub use error::{Error, Result};
pub use kernels::{center_gram, cross_gram, gram, GramMatrix, KernelSpec};
pub use sdr::{fit, transform, CoefficientMatrix, FitConfig, FitResult, GradientMode, Method};
