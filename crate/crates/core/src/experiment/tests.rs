use super::*;
use crate::error::Error;

fn quick(id: ExperimentId, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(id, seed);
    c.optimizer.n_starts = Some(2);
    c.bridge.n_days = 60;
    c.beam.n_steps = 100;
    c.beam.n_eval_points = 20;
    c.plate.nx = 24;
    c.plate.ny = 24;
    c.plate.basis_size = 20;
    c.plate.target_modes = 12;
    c.plate.strides = vec![2, 3];
    c.plate.replicates = 2;
    c
}

#[test]
fn sdof_without_subsampling_interpolates() {
    let mut c = quick(ExperimentId::SdofSubnyquist, 2);
    c.sdof.keep_every = 1;
    c.sdof.n_points = 300;
    c.sdof.dt = 0.02;
    // every point is a training point; score on the training support itself
    let out = run_experiment_in_memory(&c).unwrap();
    for m in out.report.models.values() {
        assert!(m.nmse < 0.01, "{}", out.report.render_text());
    }
}

#[test]
fn sdof_subsampled_orders_models() {
    let r = run_experiment(&quick(ExperimentId::SdofSubnyquist, 4)).unwrap();
    let (b, p) = (r.model(BASELINE).unwrap(), r.model(PHYSICS_INFORMED).unwrap());
    assert!(p.nmse < b.nmse, "{}", r.render_text());
    assert!(r.summary_value("natural_frequency_relative_error").unwrap() < 0.05);
}

#[test]
fn every_experiment_reports_both_models_deterministically() {
    for id in ExperimentId::ALL {
        let c = quick(id, 9);
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a.deterministic_toml().unwrap(), b.deterministic_toml().unwrap(), "{id}");
        assert!(a.models.contains_key(BASELINE) && a.models.contains_key(PHYSICS_INFORMED));
        assert!(a.runtime_seconds.is_some());
    }
}

#[test]
fn artifacts_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = quick(ExperimentId::BeamProduct, 1);
    c.output_dir = Some(dir.path().to_path_buf());
    let r = run_experiment(&c).unwrap();
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    for f in ["train.csv", "predictions.csv", "report.toml", "spatial_modes.csv", "temporal_modes.csv"] {
        assert!(names.iter().any(|n| n == f), "{f} missing from {names:?}");
    }
    let back = MetricsReport::from_toml(&std::fs::read_to_string(dir.path().join("report.toml")).unwrap()).unwrap();
    assert_eq!(back, r);
    let train = read_dataset(&dir.path().join("train.csv"), "y").unwrap();
    assert_eq!(train.input_names, ["t", "x"]);
    let pred = io::read_table(&dir.path().join("predictions.csv")).unwrap();
    let (m, lo) = (pred.column("physics_informed_mean").unwrap(), pred.column("physics_informed_lower").unwrap());
    let s = pred.column("physics_informed_std").unwrap();
    assert!((&m - &s * 3.0 - lo).amax() < 1e-12);
}

#[test]
fn failures_carry_their_stage() {
    let mut c = quick(ExperimentId::SdofSubnyquist, 1);
    c.sdof.dt = 0.5;
    let e = run_experiment(&c).unwrap_err();
    assert!(matches!(e, Error::Stage { stage: "simulate", .. }), "{e}");
    assert!(matches!(e.root(), Error::InvalidArgument(_)));

    let mut c = quick(ExperimentId::BridgeMean, 1);
    c.bridge.train_fraction = 0.9;
    let e = run_experiment(&c).unwrap_err();
    assert!(matches!(e, Error::Stage { stage: "config", .. }), "{e}");
}

#[test]
fn bridge_mean_tracks_slope() {
    let r = run_experiment(&quick(ExperimentId::BridgeMean, 3)).unwrap();
    let slope = r.summary_value("fitted_slope").unwrap();
    assert!((slope - r.summary_value("true_slope").unwrap()).abs() < 0.2, "{slope}");
    assert!(r.model(PHYSICS_INFORMED).unwrap().nmse < r.model(BASELINE).unwrap().nmse);
}

#[test]
fn simulation_matches_the_experiment_training_set() {
    for id in ExperimentId::ALL {
        let c = quick(id, 5);
        let sim = simulate_experiment(&c).unwrap();
        let out = run_experiment_in_memory(&c).unwrap();
        assert_eq!(sim.train, out.train, "{id}");
        let truth = out.predictions.column("y_true").unwrap();
        assert_eq!(sim.evaluation.data.y(), &truth, "{id}");
        assert_eq!(sim.evaluation.input_names, sim.train.input_names);
    }
}
