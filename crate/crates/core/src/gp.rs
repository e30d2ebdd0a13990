//! Exact Gaussian process conditioning.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::mean::MeanFunction;

/// Jitter multipliers of `trace(K) / N` tried in order until factorization succeeds.
pub const DEFAULT_JITTER_LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

/// Observed inputs (`N x D`) and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl TrainingSet {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<TrainingSet> {
        if x.nrows() == 0 {
            return Err(Error::invalid("training set needs at least one point"));
        }
        if x.nrows() != y.len() {
            return Err(Error::invalid(format!("{} input rows but {} targets", x.nrows(), y.len())));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("training data contains non-finite values"));
        }
        Ok(TrainingSet { x, y })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// The rows at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> TrainingSet {
        TrainingSet {
            x: self.x.select_rows(idx),
            y: self.y.select_rows(idx),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Multipliers of `trace(K) / N`, tried in order.
    pub jitter_ladder: Vec<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            jitter_ladder: DEFAULT_JITTER_LADDER.to_vec(),
        }
    }
}

/// A GP conditioned on a training set. Immutable.
#[derive(Debug, Clone)]
pub struct FittedGp {
    kernel: Kernel,
    mean: MeanFunction,
    x: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    /// `(K + jitter I)^-1 (y - m(X))`.
    weights: DVector<f64>,
    residual: DVector<f64>,
    jitter_used: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: DVector<f64>,
    /// Latent-function variance (observation noise excluded), clamped at 0.
    pub variance: DVector<f64>,
    pub full_covariance: Option<DMatrix<f64>>,
}

/// Cholesky of `k + jitter I` for the first jitter on the ladder that yields
/// pivots above roundoff level.
fn factorize(k: &DMatrix<f64>, ladder: &[f64]) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = k.nrows();
    let scale = k.trace() / n as f64;
    let max_diag = k.diagonal().max();
    let floor = n as f64 * f64::EPSILON * max_diag;
    let mut tried = Vec::with_capacity(ladder.len());
    for rel in ladder {
        let jitter = rel * scale;
        tried.push(jitter);
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(kj) {
            let min_pivot = c.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
            if min_pivot.is_finite() && min_pivot > floor {
                return Ok((c, jitter));
            }
        }
    }
    Err(Error::IllConditioned { jitter_ladder: tried })
}

fn check_dims(kernel: &Kernel, data: &TrainingSet) -> Result<()> {
    kernel.validate()?;
    kernel.check_input_dim(data.dim())
}

pub fn fit(kernel: &Kernel, mean: &MeanFunction, data: &TrainingSet) -> Result<FittedGp> {
    fit_with(kernel, mean, data, &FitOptions::default())
}

pub fn fit_with(kernel: &Kernel, mean: &MeanFunction, data: &TrainingSet, opts: &FitOptions) -> Result<FittedGp> {
    check_dims(kernel, data)?;
    let k = kernel.gram(data.x(), data.x(), true)?;
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("Gram matrix has non-finite entries".into()));
    }
    let (chol, jitter_used) = factorize(&k, &opts.jitter_ladder)?;
    let residual = data.y() - mean.eval(data.x())?;
    let weights = chol.solve(&residual);
    Ok(FittedGp {
        kernel: kernel.clone(),
        mean: mean.clone(),
        x: data.x().clone(),
        chol,
        weights,
        residual,
        jitter_used,
    })
}

impl FittedGp {
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn mean_function(&self) -> &MeanFunction {
        &self.mean
    }

    pub fn training_inputs(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Lower-triangular factor `L` with `L L^T = K + noise + jitter I`.
    pub fn factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.weights.len() as f64;
        let log_det: f64 = self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        -0.5 * self.residual.dot(&self.weights) - 0.5 * log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    /// Per-point observation noise variance the kernel adds on matched indices.
    pub fn noise_variance_at(&self, x_star: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.kernel.check_input_dim(x_star.ncols())?;
        let mut out = DVector::zeros(x_star.nrows());
        for r in 0..x_star.nrows() {
            let p: Vec<f64> = x_star.row(r).iter().copied().collect();
            out[r] = self.kernel.eval(&p, &p, true)? - self.kernel.eval(&p, &p, false)?;
        }
        Ok(out)
    }

    pub fn predict(&self, x_star: &DMatrix<f64>, want_full_cov: bool) -> Result<Prediction> {
        predict(self, x_star, want_full_cov)
    }
}

pub fn predict(model: &FittedGp, x_star: &DMatrix<f64>, want_full_cov: bool) -> Result<Prediction> {
    model.kernel.check_input_dim(x_star.ncols())?;
    let m = x_star.nrows();
    let cross = model.kernel.gram(&model.x, x_star, false)?;
    let mean = model.mean.eval(x_star)? + cross.tr_mul(&model.weights);
    let v = model
        .chol
        .l_dirty()
        .solve_lower_triangular(&cross)
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;

    let (variance, full_covariance) = if want_full_cov {
        let mut cov = model.kernel.gram(x_star, x_star, false)? - v.tr_mul(&v);
        cov = (&cov + cov.transpose()) * 0.5;
        let var = DVector::from_fn(m, |i, _| cov[(i, i)].max(0.0));
        cov.set_diagonal(&var);
        (var, Some(cov))
    } else {
        let mut var = DVector::zeros(m);
        for i in 0..m {
            let p: Vec<f64> = x_star.row(i).iter().copied().collect();
            var[i] = (model.kernel.eval(&p, &p, false)? - v.column(i).norm_squared()).max(0.0);
        }
        (var, None)
    };
    Ok(Prediction {
        mean,
        variance,
        full_covariance,
    })
}

/// Log marginal likelihood and its gradient with respect to the kernel's
/// log-parameters (in [`Kernel::log_params`] order).
pub fn log_marginal_likelihood(kernel: &Kernel, mean: &MeanFunction, data: &TrainingSet) -> Result<(f64, DVector<f64>)> {
    let model = fit(kernel, mean, data)?;
    let value = model.log_marginal_likelihood();
    let grads = kernel.param_gradients(data.x())?;
    let linv = lower_inverse(model.chol.l_dirty());
    let mut w = linv.transpose() * &linv;
    w.ger(-1.0, &model.weights, &model.weights, 1.0);
    // w = K^-1 - a a^T, so each component is -tr(w dK) / 2
    let gradient = DVector::from_iterator(grads.len(), grads.iter().map(|g| -0.5 * w.dot(g)));
    Ok((value, gradient))
}

/// Inverse of the lower triangle of `l`, column by column with contiguous updates.
fn lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let ls = l.as_slice();
    let mut inv = DMatrix::zeros(n, n);
    for (j, x) in inv.as_mut_slice().chunks_exact_mut(n).enumerate() {
        x[j] = 1.0;
        for k in j..n {
            x[k] /= ls[k * n + k];
            let xk = x[k];
            if xk != 0.0 {
                let lk = &ls[k * n + k + 1..(k + 1) * n];
                x[k + 1..].iter_mut().zip(lk).for_each(|(a, b)| *a -= xk * b);
            }
        }
    }
    inv
}

#[cfg(test)]
mod tests;
