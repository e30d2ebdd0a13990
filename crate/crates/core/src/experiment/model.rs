//! Standalone models: a TOML spec fitted to a CSV dataset and saved together
//! with its training data, so prediction needs nothing but the model file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::config::OptimizerConfig;
use super::io::{read_mask, Dataset, Table};
use super::report::OptimizerSummary;
use super::SCHEMA_VERSION;
use crate::boundary::{build_basis, wrap_as_kernel};
use crate::error::{Error, Result};
use crate::gp::{fit, FittedGp, TrainingSet};
use crate::kernel::{Kernel, SeParams};
use crate::mean::{fit_linear_mean, MeanFunction};
use crate::optim::{default_bounds, optimize, OptimizationSpec};

const DEFAULT_STARTS: usize = 4;

/// Constrained covariance on a masked plate, plus white noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub mask_file: PathBuf,
    pub basis_size: usize,
    pub signal_variance: f64,
    pub length_scale: f64,
    pub noise_variance: f64,
}

impl BoundarySpec {
    fn kernel(&self) -> Result<Kernel> {
        let domain = read_mask(&self.mask_file)?;
        let basis = Arc::new(build_basis(&domain, self.basis_size)?);
        wrap_as_kernel(
            basis,
            &SeParams::new(self.signal_variance, vec![self.length_scale], self.noise_variance)?,
        )
    }

    /// The same spec carrying the hyperparameters of a fitted `wrap_as_kernel` kernel.
    fn with_fitted(&self, k: &Kernel) -> Result<BoundarySpec> {
        let Kernel::Sum { terms } = k else {
            return Err(Error::invalid("fitted boundary kernel lost its structure"));
        };
        match terms.as_slice() {
            [Kernel::Constrained(c), Kernel::WhiteNoise { noise_variance }] => Ok(BoundarySpec {
                signal_variance: c.signal_variance,
                length_scale: c.length_scale,
                noise_variance: *noise_variance,
                ..self.clone()
            }),
            _ => Err(Error::invalid("fitted boundary kernel lost its structure")),
        }
    }
}

/// What to fit: exactly one of `kernel` or `boundary`, a mean, and search settings.
///
/// `kernel` values are optimization starts. `bounds` overrides the data-driven
/// search box per hyperparameter name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default = "default_target")]
    pub target: String,
    #[serde(default)]
    pub kernel: Option<Kernel>,
    #[serde(default)]
    pub boundary: Option<BoundarySpec>,
    #[serde(default)]
    pub mean: MeanFunction,
    /// Input columns of a linear mean fitted by least squares; replaces `mean`.
    #[serde(default)]
    pub fit_mean_columns: Option<Vec<usize>>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub bounds: BTreeMap<String, [f64; 2]>,
}

fn default_target() -> String {
    "y".into()
}

impl ModelSpec {
    pub fn from_toml(text: &str) -> Result<ModelSpec> {
        let spec: ModelSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a spec; a relative mask path resolves against the spec's directory.
    pub fn load(path: &Path) -> Result<ModelSpec> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut spec: ModelSpec = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let (Some(dir), Some(b)) = (path.parent(), spec.boundary.as_mut()) {
            if b.mask_file.is_relative() {
                b.mask_file = dir.join(&b.mask_file);
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        match (&self.kernel, &self.boundary) {
            (Some(k), None) => k.validate().map_err(|e| Error::Config(format!("kernel: {e}")))?,
            (None, Some(b)) if !b.mask_file.is_file() => {
                return Err(Error::Config(format!("boundary.mask_file {} does not exist", b.mask_file.display())))
            }
            (None, Some(_)) => {}
            _ => return Err(Error::Config("specify exactly one of [kernel] and [boundary]".into())),
        }
        if self.optimizer.n_starts == Some(0) {
            return Err(Error::Config("optimizer.n_starts must be at least 1".into()));
        }
        self.mean.validate().map_err(|e| Error::Config(format!("mean: {e}")))
    }

    fn start_kernel(&self) -> Result<Kernel> {
        match (&self.kernel, &self.boundary) {
            (Some(k), _) => Ok(k.clone()),
            (None, Some(b)) => b.kernel(),
            (None, None) => Err(Error::Config("specify exactly one of [kernel] and [boundary]".into())),
        }
    }
}

/// Training rows as stored in a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredData {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

/// A fitted model: hyperparameters, mean, fit diagnostics and training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema_version: u32,
    pub target: String,
    pub input_names: Vec<String>,
    pub log_marginal_likelihood: f64,
    pub jitter_used: f64,
    pub hyperparameters: BTreeMap<String, f64>,
    pub optimizer: OptimizerSummary,
    #[serde(default)]
    pub kernel: Option<Kernel>,
    #[serde(default)]
    pub boundary: Option<BoundarySpec>,
    pub mean: MeanFunction,
    pub train: StoredData,
}

/// Optimizes the spec's hyperparameters on `data`.
pub fn fit_model(spec: &ModelSpec, data: &Dataset) -> Result<ModelFile> {
    spec.validate()?;
    let train = &data.data;
    let mean = match &spec.fit_mean_columns {
        Some(cols) => fit_linear_mean(train.x(), train.y(), cols)?,
        None => spec.mean.clone(),
    };
    let kernel = spec.start_kernel()?;
    kernel.check_input_dim(train.dim())?;
    let mut bounds = default_bounds(&kernel, train)?;
    for (name, [lo, hi]) in &spec.bounds {
        bounds.set(name, *lo, *hi).map_err(|e| Error::Config(format!("bounds: {e}")))?;
    }
    let mut o = OptimizationSpec::new(bounds.clone());
    o.n_starts = spec.optimizer.n_starts.unwrap_or(DEFAULT_STARTS);
    o.max_iterations = spec.optimizer.max_iterations.unwrap_or(o.max_iterations);
    o.tolerance = spec.optimizer.tolerance.unwrap_or(o.tolerance);
    o.seed = spec.seed;
    let result = optimize(&kernel, &mean, train, &o)?;
    let model = fit(&result.kernel, &mean, train)?;
    let (kernel, boundary) = match &spec.boundary {
        Some(b) => (None, Some(b.with_fitted(&result.kernel)?)),
        None => (Some(result.kernel.clone()), None),
    };
    Ok(ModelFile {
        schema_version: SCHEMA_VERSION,
        target: data.target_name.clone(),
        input_names: data.input_names.clone(),
        log_marginal_likelihood: model.log_marginal_likelihood(),
        jitter_used: model.jitter_used(),
        hyperparameters: bounds.names.iter().cloned().zip(result.best_params.iter().copied()).collect(),
        optimizer: OptimizerSummary::from_result(&result),
        kernel,
        boundary,
        mean,
        train: StoredData {
            x: train.x().row_iter().map(|r| r.iter().copied().collect()).collect(),
            y: train.y().iter().copied().collect(),
        },
    })
}

impl ModelFile {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<ModelFile> {
        let m: ModelFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported model schema_version {}", m.schema_version)));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<ModelFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        ModelFile::from_toml(&text)
    }

    pub fn training_set(&self) -> Result<TrainingSet> {
        let d = self.input_names.len();
        if self.train.x.iter().any(|r| r.len() != d) {
            return Err(Error::Config(format!("stored training rows must have {d} inputs")));
        }
        let x = DMatrix::from_row_iterator(self.train.x.len(), d, self.train.x.iter().flatten().copied());
        TrainingSet::new(x, DVector::from_vec(self.train.y.clone()))
    }

    /// Conditions the stored kernel and mean on the stored data.
    pub fn condition(&self) -> Result<FittedGp> {
        let kernel = match (&self.kernel, &self.boundary) {
            (Some(k), None) => k.clone(),
            (None, Some(b)) => b.kernel()?,
            _ => return Err(Error::Config("model file needs exactly one of kernel and boundary".into())),
        };
        fit(&kernel, &self.mean, &self.training_set()?)
    }

    /// Predictions at the rows of `inputs`, matched to the model's input columns by
    /// name; other columns are ignored. Output: inputs, then `mean, std, lower, upper`
    /// with 3-standard-deviation bands, in observation space when `include_noise`.
    pub fn predict_table(&self, inputs: &Table, include_noise: bool) -> Result<Table> {
        let cols = self
            .input_names
            .iter()
            .map(|n| {
                inputs
                    .column(n)
                    .ok_or_else(|| Error::Parse {
                        line: 1,
                        message: format!("missing input column '{n}'"),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let x = DMatrix::from_columns(&cols);
        let gp = self.condition()?;
        let p = gp.predict(&x, false)?;
        let mut var = p.variance.clone();
        if include_noise {
            var += gp.noise_variance_at(&x)?;
        }
        let std = var.map(f64::sqrt);
        let mut out = cols;
        out.extend([p.mean.clone(), std.clone(), &p.mean - &std * 3.0, &p.mean + &std * 3.0]);
        let mut names = self.input_names.clone();
        names.extend(["mean", "std", "lower", "upper"].map(String::from));
        Table::new(names, DMatrix::from_columns(&out))
    }
}
