//! `physgp`: simulate datasets, fit and apply standalone models, and run the
//! comparative experiments.
//!
//! Exit status is 0 on success, 2 for configuration, input and usage errors,
//! and 3 for numerical failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use physgp::experiment::{
    fit_model, metric_nmse, read_dataset, read_table, run_experiment_in_memory, simulate_experiment, write_artifacts,
    write_atomic, ExperimentConfig, ExperimentId, MetricsReport, ModelFile, ModelSpec,
};
use physgp::Error;

#[derive(Parser)]
#[command(name = "physgp", version, about = "Gaussian process regression with physics-informed priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an experiment's training set and noise-free evaluation targets as CSV.
    Simulate(ExperimentArgs),
    /// Optimize a model spec's hyperparameters on a CSV dataset.
    Fit {
        /// Model spec (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Training CSV; the final column is the target named in the spec.
        #[arg(long)]
        data: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for `model.toml`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict with a fitted model at the rows of a CSV file.
    Predict {
        /// Fitted model written by `fit`.
        #[arg(long)]
        model: PathBuf,
        /// CSV holding at least the model's input columns. If it also holds the
        /// target column, the NMSE of the predictions is printed.
        #[arg(long)]
        inputs: PathBuf,
        /// Widen the bands by the observation noise.
        #[arg(long)]
        include_noise_variance: bool,
        /// Directory for `predictions.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment end to end: both models, metrics, plot-ready tables.
    Experiment(ExperimentArgs),
    /// Print one or more `report.toml` files.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config (TOML).
    #[arg(long, required_unless_present = "experiment")]
    config: Option<PathBuf>,
    /// Run this experiment with default settings instead of a config file; needs --seed.
    #[arg(long, conflicts_with = "config", requires = "seed")]
    experiment: Option<String>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config's.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report observation-space bands.
    #[arg(long)]
    include_noise_variance: bool,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match (&self.config, &self.experiment, self.seed) {
            (Some(path), _, _) => ExperimentConfig::load(path)?,
            (None, Some(id), Some(seed)) => ExperimentConfig::new(id.parse::<ExperimentId>()?, seed),
            _ => return Err(Error::Config("pass --config, or --experiment with --seed".into())),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = Some(out.clone());
        }
        cfg.include_noise_variance |= self.include_noise_variance;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for anything the user can fix in their inputs, 3 for numerical failure.
fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::IllConditioned { .. } | Error::Numeric(_) | Error::OptimizationFailed { .. } | Error::DegenerateData(_) => 3,
        _ => 2,
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Simulate(args) => {
            let cfg = args.resolve()?;
            let out = cfg
                .output_dir
                .clone()
                .ok_or_else(|| Error::Config("simulate needs --out or output_dir".into()))?;
            let sim = simulate_experiment(&cfg)?;
            write(&out.join("train.csv"), &sim.train.to_csv()?)?;
            write(&out.join("evaluation.csv"), &sim.evaluation.to_csv()?)?;
            println!(
                "{}: {} training rows, {} evaluation rows -> {}",
                cfg.experiment,
                sim.train.data.len(),
                sim.evaluation.data.len(),
                out.display()
            );
        }
        Command::Fit { config, data, seed, out } => {
            let mut spec = ModelSpec::load(&config)?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            let dataset = read_dataset(&data, &spec.target)?;
            let model = fit_model(&spec, &dataset)?;
            write(&out.join("model.toml"), &model.to_toml()?)?;
            println!("log marginal likelihood {:.6e}, jitter {:.3e}", model.log_marginal_likelihood, model.jitter_used);
            for (name, v) in &model.hyperparameters {
                println!("  {name} = {v:.6e}");
            }
        }
        Command::Predict {
            model,
            inputs,
            include_noise_variance,
            out,
        } => {
            let model = ModelFile::load(&model)?;
            let table = read_table(&inputs)?;
            let pred = model.predict_table(&table, include_noise_variance)?;
            write(&out.join("predictions.csv"), &pred.to_csv())?;
            print!("{} predictions -> {}", pred.data.nrows(), out.display());
            if let (Some(truth), Some(mean)) = (table.column(&model.target), pred.column("mean")) {
                print!(", nmse {:.6e}", metric_nmse(truth.as_slice(), mean.as_slice())?);
            }
            println!();
        }
        Command::Experiment(args) => {
            let cfg = args.resolve()?;
            let outcome = run_experiment_in_memory(&cfg)?;
            if let Some(dir) = &cfg.output_dir {
                write_artifacts(&outcome, dir).map_err(|e| e.at("write"))?;
                write(&dir.join("config.toml"), &cfg.to_toml()?)?;
            }
            print!("{}", outcome.report.render_text());
        }
        Command::Report { reports } => {
            for path in reports {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                print!("{}", MetricsReport::from_toml(&text)?.render_text());
            }
        }
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    write_atomic(path, text.as_bytes())
}
