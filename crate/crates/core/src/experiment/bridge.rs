//! Extrapolation into an unseen temperature regime with a physics-derived prior mean.

use std::collections::BTreeMap;

use super::report::{BASELINE, PHYSICS_INFORMED};
use super::{
    build_report, evaluate, fit_candidate, prediction_table, Candidate, Dataset, ExperimentConfig, ExperimentOutcome, Simulation,
};
use crate::error::{Result, StageExt};
use crate::gp::TrainingSet;
use crate::kernel::{Kernel, SeParams};
use crate::mean::{fit_linear_mean, MeanFunction};
use crate::optim::{default_bounds, median_pairwise_distance};
use crate::physics::{synth_bridge_series_with, BridgeParams, BridgeSeries};

const DEFAULT_STARTS: usize = 4;
const TEMPERATURE: usize = 1;

/// The simulated series with its leading training and trailing test index ranges.
fn generate(cfg: &ExperimentConfig) -> Result<(BridgeParams, BridgeSeries, Vec<usize>, Vec<usize>)> {
    let b = &cfg.bridge;
    let params = BridgeParams {
        samples_per_day: b.samples_per_day,
        seasonal_amplitude: b.seasonal_amplitude,
        daily_amplitude: b.daily_amplitude,
        slope: b.slope,
        residual_amplitude: b.residual_amplitude,
        noise_std: b.noise_std,
        ..BridgeParams::default()
    };
    let series = synth_bridge_series_with(&params, cfg.seed, b.n_days).stage("simulate")?;
    let n = series.data.len();
    let n_train = ((b.train_fraction * n as f64).round() as usize).max(2);
    let n_test = ((b.test_fraction * n as f64).round() as usize).max(2);
    Ok((params, series, (0..n_train).collect(), (n - n_test..n).collect()))
}

pub(super) fn simulate(cfg: &ExperimentConfig) -> Result<Simulation> {
    let (_, series, train_idx, test_idx) = generate(cfg)?;
    let truth = TrainingSet::new(series.data.x().select_rows(&test_idx), super::select_rows(&series.latent, &test_idx))?;
    Ok(Simulation {
        train: Dataset::new(input_names(), "y", series.data.select(&train_idx))?,
        evaluation: Dataset::new(input_names(), "y", truth)?,
    })
}

fn input_names() -> Vec<String> {
    vec!["t".into(), "temperature".into()]
}

pub(super) fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let (params, series, train_idx, test_idx) = generate(cfg)?;
    let (n_train, n_test) = (train_idx.len(), test_idx.len());
    let train = series.data.select(&train_idx);

    let start_kernel = |var: f64| -> Result<Kernel> {
        let scales = (0..2).map(|c| median_pairwise_distance(&train, &[c])).collect();
        Kernel::se_with_noise(&SeParams::new(var, scales, 1e-1 * var)?)
    };
    let zero_mean = start_kernel(train.y().variance()).stage("fit baseline")?;
    let baseline = Candidate {
        bounds: default_bounds(&zero_mean, &train).stage("fit baseline")?,
        kernel: zero_mean,
        mean: MeanFunction::Zero,
    };
    let mean = fit_linear_mean(train.x(), train.y(), &[TEMPERATURE]).stage("fit physics-informed")?;
    let residual = train.y() - mean.eval(train.x())?;
    let with_mean = start_kernel(residual.variance()).stage("fit physics-informed")?;
    let physics = Candidate {
        bounds: default_bounds(&with_mean, &train).stage("fit physics-informed")?,
        kernel: with_mean,
        mean: mean.clone(),
    };

    let base_fit = fit_candidate(baseline, &train, cfg, DEFAULT_STARTS).stage("fit baseline")?;
    let phys_fit = fit_candidate(physics, &train, cfg, DEFAULT_STARTS).stage("fit physics-informed")?;

    let x_test = series.data.x().select_rows(&test_idx);
    let truth = super::select_rows(&series.latent, &test_idx);
    let observed = super::select_rows(series.data.y(), &test_idx);
    let base_eval = evaluate(&base_fit, &x_test, &truth, &observed)?;
    let phys_eval = evaluate(&phys_fit, &x_test, &truth, &observed)?;

    let MeanFunction::Linear { weights, .. } = &mean else {
        unreachable!("fit_linear_mean returns a linear mean")
    };
    let temp = |idx: &[usize]| {
        let col = series.data.x().column(TEMPERATURE);
        let v: Vec<f64> = idx.iter().map(|&i| col[i]).collect();
        (v.iter().cloned().fold(f64::INFINITY, f64::min), v.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    };
    let (train_lo, train_hi) = temp(&train_idx);
    let (test_lo, test_hi) = temp(&test_idx);
    let summary = BTreeMap::from([
        ("true_slope".to_string(), params.slope),
        ("fitted_slope".to_string(), weights[0]),
        ("n_train".to_string(), n_train as f64),
        ("n_test".to_string(), n_test as f64),
        ("train_temperature_min".to_string(), train_lo),
        ("train_temperature_max".to_string(), train_hi),
        ("test_temperature_min".to_string(), test_lo),
        ("test_temperature_max".to_string(), test_hi),
        ("nmse_ratio_physics_over_baseline".to_string(), phys_eval.report.nmse / base_eval.report.nmse),
    ]);

    let predictions = prediction_table(
        &["t", "temperature"],
        &x_test,
        &truth,
        &[(BASELINE, &base_eval), (PHYSICS_INFORMED, &phys_eval)],
        cfg.include_noise_variance,
    )?;
    Ok(ExperimentOutcome {
        report: build_report(
            cfg,
            "noise-free displacement over the final segment of the series",
            summary,
            base_eval.report,
            phys_eval.report,
        ),
        train: Dataset::new(input_names(), "y", train)?,
        predictions,
        extra_tables: Vec::new(),
    })
}
