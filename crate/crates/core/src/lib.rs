//! Gaussian process regression with physics-derived, hybrid and
//! boundary-constrained priors.
//!
//! * [`kernel`]: covariance functions (squared exponential, white noise,
//!   oscillator covariances) and their sum/product composition.
//! * [`mean`]: prior mean functions.
//! * [`gp`]: exact conditioning, prediction and log marginal likelihood.
//! * [`optim`]: multi-start, bounded quasi-Newton hyperparameter search.
//! * [`physics`]: simulators used as ground truth.
//! * [`boundary`]: reduced-rank covariance on masked 2D domains.
//! * [`experiment`]: metrics, file formats and the end-to-end experiments.

pub mod boundary;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod kernel;
pub mod mean;
pub mod optim;
pub mod physics;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use gp::{fit, log_marginal_likelihood, predict, FittedGp, Prediction, TrainingSet};
pub use kernel::{combine_product, combine_sum, Kernel, ModalSet, SdofParams, SeParams};
pub use mean::MeanFunction;
pub use optim::{optimize, OptimizationResult, OptimizationSpec};
