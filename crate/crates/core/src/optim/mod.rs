//! Log marginal likelihood maximization over kernel hyperparameters.
//!
//! Physical oscillator parameters (natural frequency, damping) are ordinary
//! hyperparameters here, so this doubles as system identification.

mod bounds;
mod halton;
mod lbfgs;

pub use bounds::{default_bounds, default_bounds_in_band, median_pairwise_distance, Bounds};

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gp::{log_marginal_likelihood, TrainingSet};
use crate::kernel::Kernel;
use crate::mean::MeanFunction;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationSpec {
    pub bounds: Bounds,
    pub n_starts: usize,
    pub max_iterations: usize,
    /// Stop once two consecutive steps improve the LML by less than this, relatively.
    pub tolerance: f64,
    pub seed: u64,
}

impl OptimizationSpec {
    pub fn new(bounds: Bounds) -> OptimizationSpec {
        OptimizationSpec {
            bounds,
            n_starts: 8,
            max_iterations: 200,
            tolerance: 1e-10,
            seed: 0,
        }
    }

    pub fn validate(&self, n_params: usize) -> Result<()> {
        self.bounds.validate()?;
        if self.bounds.len() != n_params {
            return Err(Error::invalid(format!(
                "bounds cover {} parameters, kernel has {n_params}",
                self.bounds.len()
            )));
        }
        if n_params > halton::MAX_DIM {
            return Err(Error::invalid(format!("at most {} hyperparameters supported, got {n_params}", halton::MAX_DIM)));
        }
        if self.n_starts == 0 {
            return Err(Error::invalid("n_starts must be at least 1"));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(Error::invalid("tolerance must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Outcome of one local ascent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartTrace {
    /// Starting hyperparameters, natural units.
    pub start: Vec<f64>,
    pub start_lml: Option<f64>,
    pub final_params: Vec<f64>,
    /// `None` when the start point itself could not be evaluated.
    pub final_lml: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    /// The kernel at the best hyperparameters found.
    pub kernel: Kernel,
    pub best_params: Vec<f64>,
    pub best_lml: f64,
    pub per_start_trace: Vec<StartTrace>,
}

/// Start points in log space. Start 0 is the kernel's own parameters clipped
/// into the box; the rest follow a shifted Halton sequence, so the starts for
/// `n` are a prefix of the starts for `n + 1`.
fn start_points(kernel: &Kernel, lo: &[f64], hi: &[f64], n: usize, seed: u64) -> Vec<Vec<f64>> {
    let first: Vec<f64> = kernel
        .log_params()
        .iter()
        .enumerate()
        .map(|(i, v)| v.clamp(lo[i], hi[i]))
        .collect();
    let seq = halton::ShiftedHalton::new(lo.len(), seed);
    std::iter::once(first)
        .chain((1..n).map(|k| {
            seq.point(k)
                .iter()
                .enumerate()
                .map(|(i, u)| lo[i] + u * (hi[i] - lo[i]))
                .collect()
        }))
        .collect()
}

/// Higher LML first; ties broken by the lexicographically smallest log-parameter vector.
fn rank(a: &(f64, Vec<f64>), b: &(f64, Vec<f64>)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| {
        a.1.iter()
            .zip(&b.1)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

pub fn optimize(kernel: &Kernel, mean: &MeanFunction, data: &TrainingSet, spec: &OptimizationSpec) -> Result<OptimizationResult> {
    kernel.validate()?;
    kernel.check_input_dim(data.dim())?;
    spec.validate(kernel.n_params())?;
    let lo: Vec<f64> = spec.bounds.lower.iter().map(|v| v.ln()).collect();
    let hi: Vec<f64> = spec.bounds.upper.iter().map(|v| v.ln()).collect();

    let objective = |theta: &[f64]| -> Result<(f64, Vec<f64>)> {
        let k = kernel.with_log_params(theta)?;
        let (v, g) = log_marginal_likelihood(&k, mean, data)?;
        if !v.is_finite() || g.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite log marginal likelihood".into()));
        }
        Ok((-v, g.iter().map(|x| -x).collect()))
    };

    let mut traces = Vec::with_capacity(spec.n_starts);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for x0 in start_points(kernel, &lo, &hi, spec.n_starts, spec.seed) {
        let start: Vec<f64> = x0.iter().map(|v| v.exp()).collect();
        let start_lml = objective(&x0).ok().map(|(f, _)| -f);
        match lbfgs::minimize(objective, &x0, &lo, &hi, spec.max_iterations, spec.tolerance) {
            Ok(out) => {
                let cand = (-out.f, out.x.clone());
                if best.as_ref().is_none_or(|b| rank(&cand, b) == Ordering::Less) {
                    best = Some(cand);
                }
                traces.push(StartTrace {
                    start,
                    start_lml,
                    final_params: out.x.iter().map(|v| v.exp()).collect(),
                    final_lml: Some(-out.f),
                    iterations: out.iterations,
                    converged: out.converged,
                });
            }
            Err(_) => traces.push(StartTrace {
                final_params: start.clone(),
                start,
                start_lml,
                final_lml: None,
                iterations: 0,
                converged: false,
            }),
        }
    }
    let Some((best_lml, theta)) = best else {
        return Err(Error::OptimizationFailed {
            n_starts: spec.n_starts,
            traces,
        });
    };
    let kernel = kernel.with_log_params(&theta)?;
    Ok(OptimizationResult {
        best_params: kernel.params(),
        kernel,
        best_lml,
        per_start_trace: traces,
    })
}
