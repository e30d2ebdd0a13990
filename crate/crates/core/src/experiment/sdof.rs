//! Sub-Nyquist recovery of a white-noise-driven oscillator.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::report::{BASELINE, PHYSICS_INFORMED};
use super::{
    add_noise, build_report, evaluate, fit_candidate, prediction_table, select_rows, streams, Candidate, Dataset, ExperimentConfig,
    ExperimentOutcome, Simulation,
};
use crate::error::{Result, StageExt};
use crate::gp::TrainingSet;
use crate::kernel::{combine_sum, Kernel, SdofParams, SeParams};
use crate::mean::MeanFunction;
use crate::optim::{default_bounds, default_bounds_in_band};
use crate::physics::{simulate_sdof, SdofSystem};

const DEFAULT_STARTS: usize = 8;

/// Training samples and the held-out truth, before any model is fitted.
struct Generated {
    omega: f64,
    train: TrainingSet,
    x_test: DMatrix<f64>,
    truth: DVector<f64>,
    observed: DVector<f64>,
    target: &'static str,
    duration: f64,
}

fn generate(cfg: &ExperimentConfig) -> Result<Generated> {
    let s = &cfg.sdof;
    let omega = 2.0 * PI * s.natural_frequency_hz;
    let amplitude = s.response_std.powi(2) * s.damping_ratio * omega.powi(3);
    let system = SdofSystem::from_modal(omega, s.damping_ratio, amplitude).stage("simulate")?;
    let traj = simulate_sdof(&system, s.dt, s.n_points, cfg.seed).stage("simulate")?;
    let latent = traj.values.column(0).into_owned();
    let observed = add_noise(&latent, s.noise_std, cfg.seed, streams::OBSERVATION_NOISE).stage("simulate")?;
    let times = DMatrix::from_column_slice(s.n_points, 1, &traj.times);

    let (train_idx, mut test_idx): (Vec<usize>, Vec<usize>) = (0..s.n_points).partition(|i| i % s.keep_every == 0);
    let target = if test_idx.is_empty() {
        // nothing withheld: score on the training support
        test_idx = train_idx.clone();
        "noise-free displacement at the training sample times"
    } else {
        "noise-free displacement at the withheld sample times"
    };
    let train = TrainingSet::new(times.select_rows(&train_idx), select_rows(&observed, &train_idx)).stage("subsample")?;
    Ok(Generated {
        omega,
        train,
        x_test: times.select_rows(&test_idx),
        truth: select_rows(&latent, &test_idx),
        observed: select_rows(&observed, &test_idx),
        target,
        duration: traj.times[s.n_points - 1],
    })
}

pub(super) fn simulate(cfg: &ExperimentConfig) -> Result<Simulation> {
    let g = generate(cfg)?;
    Ok(Simulation {
        train: Dataset::new(vec!["t".into()], "y", g.train)?,
        evaluation: Dataset::new(vec!["t".into()], "y", TrainingSet::new(g.x_test, g.truth)?)?,
    })
}

pub(super) fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let s = &cfg.sdof;
    let Generated {
        omega,
        train,
        x_test,
        truth,
        observed,
        target,
        duration,
    } = generate(cfg)?;
    let spacing = s.dt * s.keep_every as f64;
    // Beyond the training Nyquist limit the frequency is only identifiable up to
    // aliasing, so subsampled runs search one Nyquist zone.
    let band = match (s.frequency_band, s.keep_every) {
        (Some([lo, hi]), _) => Some((lo, hi)),
        (None, 1) => None,
        (None, _) => Some((PI / spacing, 2.0 * PI / spacing)),
    };

    let var = train.y().variance();
    let se = Kernel::se_with_noise(&SeParams::new(var, vec![spacing], 1e-2 * var)?)?;
    let baseline = Candidate {
        bounds: default_bounds(&se, &train).stage("fit baseline")?,
        kernel: se,
        mean: MeanFunction::Zero,
    };
    let w0 = match band {
        Some((lo, hi)) => (lo * hi).sqrt(),
        None => (2.0 * PI / duration * PI / spacing).sqrt(),
    };
    let z0 = 0.1;
    let physics_kernel = combine_sum(vec![
        Kernel::sdof(SdofParams::new(w0, z0, var * z0 * w0.powi(3))?),
        Kernel::white_noise(1e-2 * var)?,
    ])?;
    let physics_bounds = match band {
        Some(b) => default_bounds_in_band(&physics_kernel, &train, b),
        None => default_bounds(&physics_kernel, &train),
    }
    .stage("fit physics-informed")?;
    let physics = Candidate {
        kernel: physics_kernel,
        mean: MeanFunction::Zero,
        bounds: physics_bounds,
    };

    let base_fit = fit_candidate(baseline, &train, cfg, DEFAULT_STARTS).stage("fit baseline")?;
    let phys_fit = fit_candidate(physics, &train, cfg, DEFAULT_STARTS).stage("fit physics-informed")?;

    let base_eval = evaluate(&base_fit, &x_test, &truth, &observed)?;
    let phys_eval = evaluate(&phys_fit, &x_test, &truth, &observed)?;

    let w_hat = phys_fit.hyperparameter("sum[0].sdof.natural_frequency")?;
    let z_hat = phys_fit.hyperparameter("sum[0].sdof.damping_ratio")?;
    let mut summary = BTreeMap::from([
        ("true_natural_frequency".to_string(), omega),
        ("recovered_natural_frequency".to_string(), w_hat),
        ("natural_frequency_relative_error".to_string(), (w_hat - omega).abs() / omega),
        ("true_damping_ratio".to_string(), s.damping_ratio),
        ("recovered_damping_ratio".to_string(), z_hat),
        ("training_spacing".to_string(), spacing),
        ("n_train".to_string(), train.len() as f64),
        ("n_held_out".to_string(), truth.len() as f64),
        ("nmse_ratio_baseline_over_physics".to_string(), base_eval.report.nmse / phys_eval.report.nmse),
    ]);
    if let Some((lo, hi)) = band {
        summary.insert("frequency_band_lower".into(), lo);
        summary.insert("frequency_band_upper".into(), hi);
    }

    let predictions = prediction_table(
        &["t"],
        &x_test,
        &truth,
        &[(BASELINE, &base_eval), (PHYSICS_INFORMED, &phys_eval)],
        cfg.include_noise_variance,
    )?;
    let report = build_report(
        cfg,
        target,
        summary,
        base_eval.report,
        phys_eval.report,
    );
    Ok(ExperimentOutcome {
        report,
        train: Dataset::new(vec!["t".into()], "y", train)?,
        predictions,
        extra_tables: Vec::new(),
    })
}
