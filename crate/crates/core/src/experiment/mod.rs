//! End-to-end experiments: simulate, subsample, fit a black-box baseline and a
//! physics-informed model, predict on held-out inputs and score both.
//!
//! Every run is a pure function of its [`ExperimentConfig`]; all randomness is
//! derived from the config seed.

mod beam;
mod bridge;
pub mod config;
pub mod io;
pub mod metrics;
pub mod model;
mod plate;
pub mod report;
mod sdof;

pub use config::{ExperimentConfig, ExperimentId, SCHEMA_VERSION};
pub use io::{read_dataset, read_mask, read_table, write_atomic, Dataset, Table};
pub use metrics::{metric_log_loss, metric_nmse};
pub use model::{fit_model, BoundarySpec, ModelFile, ModelSpec};
pub use report::{MetricsReport, ModelReport, OptimizerSummary, BASELINE, PHYSICS_INFORMED};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result, StageExt};
use crate::gp::{fit, FittedGp, TrainingSet};
use crate::kernel::Kernel;
use crate::mean::MeanFunction;
use crate::optim::{optimize, Bounds, OptimizationResult, OptimizationSpec};

/// Everything a run produces, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: MetricsReport,
    pub train: Dataset,
    /// Held-out inputs, truth, and each model's mean, standard deviation and 3-sigma band.
    pub predictions: Table,
    /// Further plot-ready tables, keyed by file stem.
    pub extra_tables: Vec<(String, Table)>,
}

/// An experiment's data without any model: the training set and the noise-free
/// target at the inputs the experiment scores on.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub train: Dataset,
    pub evaluation: Dataset,
}

pub fn simulate_experiment(config: &ExperimentConfig) -> Result<Simulation> {
    config.validate().stage("config")?;
    match config.experiment {
        ExperimentId::SdofSubnyquist => sdof::simulate(config),
        ExperimentId::BridgeMean => bridge::simulate(config),
        ExperimentId::BeamProduct => beam::simulate(config),
        ExperimentId::PlateBoundary => plate::simulate(config),
    }
}

/// Runs the experiment and, when `output_dir` is set, writes its artifacts.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricsReport> {
    let outcome = run_experiment_in_memory(config)?;
    if let Some(dir) = &config.output_dir {
        write_artifacts(&outcome, dir).stage("write")?;
    }
    Ok(outcome.report)
}

pub fn run_experiment_in_memory(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate().stage("config")?;
    let start = Instant::now();
    let mut outcome = match config.experiment {
        ExperimentId::SdofSubnyquist => sdof::run(config),
        ExperimentId::BridgeMean => bridge::run(config),
        ExperimentId::BeamProduct => beam::run(config),
        ExperimentId::PlateBoundary => plate::run(config),
    }?;
    outcome.report.runtime_seconds = Some(start.elapsed().as_secs_f64());
    outcome.report.validate().stage("metrics")?;
    Ok(outcome)
}

/// Writes `train.csv`, `predictions.csv`, the extra tables and `report.toml`.
pub fn write_artifacts(outcome: &ExperimentOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = vec![
        (dir.join("train.csv"), outcome.train.to_csv()?),
        (dir.join("predictions.csv"), outcome.predictions.to_csv()),
    ];
    for (stem, t) in &outcome.extra_tables {
        files.push((dir.join(format!("{stem}.csv")), t.to_csv()));
    }
    files.push((dir.join("report.toml"), outcome.report.to_toml()?));
    for (path, text) in &files {
        write_atomic(path, text.as_bytes())?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// A kernel, mean and search box ready for hyperparameter optimization.
pub(crate) struct Candidate {
    pub kernel: Kernel,
    pub mean: MeanFunction,
    pub bounds: Bounds,
}

pub(crate) struct FittedModel {
    pub result: OptimizationResult,
    pub model: FittedGp,
    pub bounds: Bounds,
}

impl FittedModel {
    pub fn kernel(&self) -> &Kernel {
        &self.result.kernel
    }

    pub fn hyperparameter(&self, name: &str) -> Result<f64> {
        self.bounds
            .names
            .iter()
            .position(|n| n == name)
            .map(|i| self.result.best_params[i])
            .ok_or_else(|| Error::invalid(format!("no hyperparameter '{name}'")))
    }
}

pub(crate) fn fit_candidate(
    c: Candidate,
    data: &TrainingSet,
    config: &ExperimentConfig,
    default_starts: usize,
) -> Result<FittedModel> {
    let o = &config.optimizer;
    let mut spec = OptimizationSpec::new(c.bounds.clone());
    spec.n_starts = o.n_starts.unwrap_or(default_starts);
    spec.max_iterations = o.max_iterations.unwrap_or(spec.max_iterations);
    spec.tolerance = o.tolerance.unwrap_or(spec.tolerance);
    spec.seed = config.seed;
    let result = optimize(&c.kernel, &c.mean, data, &spec)?;
    let model = fit(&result.kernel, &c.mean, data)?;
    Ok(FittedModel {
        result,
        model,
        bounds: c.bounds,
    })
}

/// Predictions of one model on the held-out inputs.
pub(crate) struct Evaluated {
    pub mean: DVector<f64>,
    /// Latent predictive variance.
    pub variance: DVector<f64>,
    /// Observation noise variance at each input.
    pub noise: DVector<f64>,
    pub report: ModelReport,
}

/// Scores `m` at `x`: NMSE against the noise-free `truth`, log loss against the
/// noisy `observed` values with observation-space variance.
pub(crate) fn evaluate(m: &FittedModel, x: &DMatrix<f64>, truth: &DVector<f64>, observed: &DVector<f64>) -> Result<Evaluated> {
    let p = m.model.predict(x, false).stage("predict")?;
    let noise = m.model.noise_variance_at(x).stage("predict")?;
    let obs_var = &p.variance + &noise;
    let nmse = metric_nmse(truth.as_slice(), p.mean.as_slice()).stage("metrics")?;
    let log_loss = metric_log_loss(observed.as_slice(), p.mean.as_slice(), obs_var.as_slice()).stage("metrics")?;
    let report = ModelReport {
        kernel: report::describe_kernel(m.kernel()),
        mean: report::describe_mean(m.model.mean_function()),
        nmse,
        log_loss,
        jitter_used: m.model.jitter_used(),
        log_marginal_likelihood: m.result.best_lml,
        hyperparameters: m.bounds.names.iter().cloned().zip(m.result.best_params.iter().copied()).collect(),
        optimizer: OptimizerSummary::from_result(&m.result),
        per_mode: BTreeMap::new(),
    };
    Ok(Evaluated {
        mean: p.mean,
        variance: p.variance,
        noise,
        report,
    })
}

/// Held-out table: inputs, truth, then `mean, std, lower, upper` per model.
/// Bands are 3 standard deviations, in observation space when `include_noise`.
pub(crate) fn prediction_table(
    input_names: &[&str],
    x: &DMatrix<f64>,
    truth: &DVector<f64>,
    models: &[(&str, &Evaluated)],
    include_noise: bool,
) -> Result<Table> {
    let n = x.nrows();
    let mut columns: Vec<String> = input_names.iter().map(|s| s.to_string()).collect();
    columns.push("y_true".into());
    let mut cols: Vec<DVector<f64>> = x.column_iter().map(|c| c.into_owned()).collect();
    cols.push(truth.clone());
    for (name, e) in models {
        let std = DVector::from_fn(n, |i, _| {
            let v = e.variance[i] + if include_noise { e.noise[i] } else { 0.0 };
            v.sqrt()
        });
        columns.extend(["mean", "std", "lower", "upper"].map(|s| format!("{name}_{s}")));
        cols.push(e.mean.clone());
        cols.push(std.clone());
        cols.push(&e.mean - &std * 3.0);
        cols.push(&e.mean + &std * 3.0);
    }
    Table::new(columns, DMatrix::from_columns(&cols))
}

pub(crate) fn build_report(
    cfg: &ExperimentConfig,
    evaluation_target: &str,
    summary: BTreeMap<String, f64>,
    baseline: ModelReport,
    physics: ModelReport,
) -> MetricsReport {
    MetricsReport {
        schema_version: SCHEMA_VERSION,
        experiment: cfg.experiment.to_string(),
        seed: cfg.seed,
        nmse_convention: metrics::NMSE_CONVENTION.into(),
        log_loss_convention: metrics::LOG_LOSS_CONVENTION.into(),
        evaluation_target: evaluation_target.into(),
        runtime_seconds: None,
        summary,
        models: BTreeMap::from([(BASELINE.to_string(), baseline), (PHYSICS_INFORMED.to_string(), physics)]),
    }
}

/// Adds seeded Gaussian noise; a zero `std` returns `clean` unchanged.
pub(crate) fn add_noise(clean: &DVector<f64>, std: f64, seed: u64, stream: u64) -> Result<DVector<f64>> {
    if std == 0.0 {
        return Ok(clean.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let dist = Normal::new(0.0, std).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(clean.map(|v| v + dist.sample(&mut rng)))
}

pub(crate) fn select_rows(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

/// Random-number streams, one per independent noise source.
pub(crate) mod streams {
    pub const OBSERVATION_NOISE: u64 = 1;
    pub const FIELD_COEFFICIENTS: u64 = 2;
    pub const EVALUATION_NOISE: u64 = 3;
}

#[cfg(test)]
mod tests;
