//! Space-time regression on an impulse-excited cantilever with a modal-oscillator
//! by squared-exponential product kernel, scored mode by mode.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::report::{BASELINE, PHYSICS_INFORMED};
use super::{
    add_noise, build_report, evaluate, fit_candidate, metric_nmse, prediction_table, streams, Candidate, Dataset,
    ExperimentConfig, ExperimentOutcome, Simulation, Table,
};
use crate::error::{Error, Result, StageExt};
use crate::gp::TrainingSet;
use crate::kernel::{combine_product, combine_sum, Kernel, ModalSet, ParamKind, SdofParams};
use crate::mean::MeanFunction;
use crate::optim::{default_bounds, Bounds};
use crate::physics::{simulate_beam, BeamResponse, BeamSpec};

const DEFAULT_STARTS: usize = 6;
const SPATIAL_VARIANCE: &str = "sum[0].product[1].se.signal_variance";
const START_DAMPING: f64 = 0.05;

/// Sensor training grid and the full evaluation field.
struct Generated {
    train: TrainingSet,
    field: BeamResponse,
    x_eval: Vec<f64>,
    eval_x: DMatrix<f64>,
    truth: DVector<f64>,
    observed: DVector<f64>,
}

fn generate(cfg: &ExperimentConfig) -> Result<Generated> {
    let b = &cfg.beam;
    let spec = BeamSpec {
        length: b.length,
        damping_ratios: b.damping_ratios.clone(),
        fundamental_frequency: 2.0 * PI * b.fundamental_hz,
        modal_frequencies: None,
        mass_per_length: 1.0,
        impulse_location: b.length,
        impulse_magnitude: 1.0,
    };
    let sensors: Vec<f64> = (1..=b.n_sensors).map(|k| k as f64 * b.length / b.n_sensors as f64).collect();
    let at_sensors = simulate_beam(&spec, b.dt, b.n_steps, &sensors).stage("simulate")?;
    let x_eval: Vec<f64> = (0..b.n_eval_points)
        .map(|k| k as f64 * b.length / (b.n_eval_points - 1) as f64)
        .collect();
    let field = simulate_beam(&spec, b.dt, b.n_steps, &x_eval).stage("simulate")?;

    // every `time_stride`-th step of the leading record, at every sensor
    let n_train_steps = ((b.train_fraction * b.n_steps as f64).floor() as usize).max(1);
    let steps: Vec<usize> = (0..n_train_steps).step_by(b.time_stride).collect();
    let (train_x, clean) = grid(&at_sensors, &steps, &sensors);
    let train_y = add_noise(&clean, b.noise_std, cfg.seed, streams::OBSERVATION_NOISE).stage("simulate")?;
    let train = TrainingSet::new(train_x, train_y).stage("subsample")?;

    let all_steps: Vec<usize> = (0..b.n_steps).collect();
    let (eval_x, truth) = grid(&field, &all_steps, &x_eval);
    let observed = add_noise(&truth, b.noise_std, cfg.seed, streams::EVALUATION_NOISE).stage("simulate")?;
    Ok(Generated {
        train,
        field,
        x_eval,
        eval_x,
        truth,
        observed,
    })
}

pub(super) fn simulate(cfg: &ExperimentConfig) -> Result<Simulation> {
    let g = generate(cfg)?;
    Ok(Simulation {
        train: Dataset::new(input_names(), "y", g.train)?,
        evaluation: Dataset::new(input_names(), "y", TrainingSet::new(g.eval_x, g.truth)?)?,
    })
}

fn input_names() -> Vec<String> {
    vec!["t".into(), "x".into()]
}

pub(super) fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let b = &cfg.beam;
    let n_modes = b.damping_ratios.len();
    let Generated {
        train,
        field,
        x_eval,
        eval_x,
        truth,
        observed,
    } = generate(cfg)?;

    let var = train.y().variance();
    let spatial = Kernel::squared_exponential(1.0, vec![0.3 * b.length])?;
    let placeholder = ModalSet::new(
        (0..n_modes)
            .map(|i| SdofParams::new((i + 1) as f64, START_DAMPING, 1.0))
            .collect::<Result<_>>()?,
    )?;
    let physics = start_in_bounds(
        combine_sum(vec![
            combine_product(vec![(Kernel::mdof(placeholder), vec![0]), (spatial.clone(), vec![1])])?,
            Kernel::white_noise(1e-2 * var)?,
        ])?,
        &train,
        b.spatial_variance_bounds,
    )
    .stage("fit physics-informed")?;
    let temporal = Kernel::squared_exponential(var, vec![4.0 * b.dt * b.time_stride as f64])?;
    let baseline = start_in_bounds(
        combine_sum(vec![
            combine_product(vec![(temporal, vec![0]), (spatial, vec![1])])?,
            Kernel::white_noise(1e-2 * var)?,
        ])?,
        &train,
        b.spatial_variance_bounds,
    )
    .stage("fit baseline")?;

    let base_fit = fit_candidate(baseline, &train, cfg, DEFAULT_STARTS).stage("fit baseline")?;
    let phys_fit = fit_candidate(physics, &train, cfg, DEFAULT_STARTS).stage("fit physics-informed")?;
    let mut base_eval = evaluate(&base_fit, &eval_x, &truth, &observed)?;
    let mut phys_eval = evaluate(&phys_fit, &eval_x, &truth, &observed)?;

    let base_modes = decompose(&base_eval.mean, &field).stage("metrics")?;
    let phys_modes = decompose(&phys_eval.mean, &field).stage("metrics")?;
    base_eval.report.per_mode = base_modes.scores(&field)?;
    phys_eval.report.per_mode = phys_modes.scores(&field)?;

    let mut summary = BTreeMap::from([
        ("n_train".to_string(), train.len() as f64),
        ("n_eval".to_string(), truth.len() as f64),
        (
            "temporal_mode_1_ratio_baseline_over_physics".to_string(),
            base_eval.report.per_mode["temporal_mode_1"] / phys_eval.report.per_mode["temporal_mode_1"],
        ),
    ]);
    for (i, w) in field.frequencies.iter().enumerate() {
        summary.insert(format!("true_frequency_mode_{}", i + 1), *w);
        let name = format!("sum[0].product[0].mdof.mode[{i}].natural_frequency");
        summary.insert(format!("recovered_frequency_mode_{}", i + 1), phys_fit.hyperparameter(&name)?);
    }

    let predictions = prediction_table(
        &["t", "x"],
        &eval_x,
        &truth,
        &[(BASELINE, &base_eval), (PHYSICS_INFORMED, &phys_eval)],
        cfg.include_noise_variance,
    )?;
    let extra_tables = vec![
        (
            "spatial_modes".to_string(),
            mode_table("x", &x_eval, &field.shapes, &base_modes.spatial, &phys_modes.spatial)?,
        ),
        (
            "temporal_modes".to_string(),
            mode_table("t", &field.trajectory.times, &field.modal_coordinates, &base_modes.temporal, &phys_modes.temporal)?,
        ),
    ];
    Ok(ExperimentOutcome {
        report: build_report(
            cfg,
            "noise-free deflection on the full space-time evaluation grid",
            summary,
            base_eval.report,
            phys_eval.report,
        ),
        train: Dataset::new(input_names(), "y", train)?,
        predictions,
        extra_tables,
    })
}

/// Rows `(t_k, x_j)` for each listed step `k` and every point `j`, time-major.
fn grid(r: &BeamResponse, steps: &[usize], xs: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let n = steps.len() * xs.len();
    let mut x = DMatrix::zeros(n, 2);
    let mut y = DVector::zeros(n);
    for (a, &k) in steps.iter().enumerate() {
        for (j, &p) in xs.iter().enumerate() {
            let row = a * xs.len() + j;
            x[(row, 0)] = r.trajectory.times[k];
            x[(row, 1)] = p;
            y[row] = r.trajectory.values[(k, j)];
        }
    }
    (x, y)
}

/// Data-driven bounds with the spatial variance narrowed, and a start with
/// frequencies mid-band, light damping and the signal variance shared evenly.
fn start_in_bounds(kernel: Kernel, train: &TrainingSet, spatial_variance: [f64; 2]) -> Result<Candidate> {
    let mut bounds: Bounds = default_bounds(&kernel, train)?;
    bounds.set(SPATIAL_VARIANCE, spatial_variance[0], spatial_variance[1])?;
    let var = train.y().variance();
    let mut p = kernel.params();
    let info = kernel.param_info();
    let mut omega = 0.0;
    for (i, pi) in info.iter().enumerate() {
        let mid = (bounds.lower[i] * bounds.upper[i]).sqrt();
        p[i] = match &pi.kind {
            ParamKind::NaturalFrequency { .. } => {
                omega = mid;
                mid
            }
            ParamKind::DampingRatio => START_DAMPING,
            ParamKind::Amplitude { n_modes, .. } => var / *n_modes as f64 * START_DAMPING * omega.powi(3),
            _ if pi.name == SPATIAL_VARIANCE => 1.0,
            _ => p[i],
        }
        .clamp(bounds.lower[i], bounds.upper[i]);
    }
    Ok(Candidate {
        kernel: kernel.with_params(&p)?,
        mean: MeanFunction::Zero,
        bounds,
    })
}

/// Least-squares modal coordinates and shapes of a predicted field.
struct Modes {
    /// `n_steps x n_modes`, projected onto the true shapes.
    temporal: DMatrix<f64>,
    /// `n_points x n_modes`, projected onto the true coordinates.
    spatial: DMatrix<f64>,
}

fn decompose(mean: &DVector<f64>, truth: &BeamResponse) -> Result<Modes> {
    let (n_t, n_x) = (truth.modal_coordinates.nrows(), truth.shapes.nrows());
    let f = DMatrix::from_row_slice(n_t, n_x, mean.as_slice());
    let solve = |basis: &DMatrix<f64>, rhs: DMatrix<f64>| -> Result<DMatrix<f64>> {
        let gram = basis.tr_mul(basis);
        let inv = gram
            .try_inverse()
            .ok_or_else(|| Error::Numeric("modal projection is singular".into()))?;
        Ok(rhs * inv)
    };
    Ok(Modes {
        temporal: solve(&truth.shapes, &f * &truth.shapes)?,
        spatial: solve(&truth.modal_coordinates, f.tr_mul(&truth.modal_coordinates))?,
    })
}

impl Modes {
    fn scores(&self, truth: &BeamResponse) -> Result<BTreeMap<String, f64>> {
        let mut out = BTreeMap::new();
        for i in 0..truth.shapes.ncols() {
            let q = truth.modal_coordinates.column(i);
            let phi = truth.shapes.column(i);
            out.insert(
                format!("temporal_mode_{}", i + 1),
                metric_nmse(q.as_slice(), self.temporal.column(i).as_slice())?,
            );
            out.insert(
                format!("spatial_mode_{}", i + 1),
                metric_nmse(phi.as_slice(), self.spatial.column(i).as_slice())?,
            );
        }
        Ok(out)
    }
}

fn mode_table(axis: &str, at: &[f64], truth: &DMatrix<f64>, base: &DMatrix<f64>, phys: &DMatrix<f64>) -> Result<Table> {
    let mut columns = vec![axis.to_string()];
    let mut cols = vec![DVector::from_column_slice(at)];
    for i in 0..truth.ncols() {
        for (label, m) in [("true", truth), (BASELINE, base), (PHYSICS_INFORMED, phys)] {
            columns.push(format!("{label}_mode_{}", i + 1));
            cols.push(m.column(i).into_owned());
        }
    }
    Table::new(columns, DMatrix::from_columns(&cols))
}
