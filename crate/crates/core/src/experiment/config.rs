use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    SdofSubnyquist,
    BridgeMean,
    BeamProduct,
    PlateBoundary,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 4] = [
        ExperimentId::SdofSubnyquist,
        ExperimentId::BridgeMean,
        ExperimentId::BeamProduct,
        ExperimentId::PlateBoundary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::SdofSubnyquist => "sdof-subnyquist",
            ExperimentId::BridgeMean => "bridge-mean",
            ExperimentId::BeamProduct => "beam-product",
            ExperimentId::PlateBoundary => "plate-boundary",
        }
    }
}

impl std::fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

/// Optimizer settings; unset fields take per-experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub n_starts: Option<usize>,
    pub max_iterations: Option<usize>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdofSettings {
    pub natural_frequency_hz: f64,
    pub damping_ratio: f64,
    /// Stationary standard deviation of the simulated displacement.
    pub response_std: f64,
    pub dt: f64,
    pub n_points: usize,
    /// Condition on every `keep_every`-th sample; the rest are held out.
    pub keep_every: usize,
    pub noise_std: f64,
    /// Natural-frequency search band in rad/s. Defaults to the second Nyquist
    /// zone of the training spacing, `[pi / spacing, 2 pi / spacing]`.
    pub frequency_band: Option<[f64; 2]>,
}

impl Default for SdofSettings {
    fn default() -> Self {
        SdofSettings {
            natural_frequency_hz: 1.0,
            damping_ratio: 0.05,
            response_std: 1.0,
            dt: 0.075,
            n_points: 1000,
            keep_every: 10,
            noise_std: 0.0,
            frequency_band: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeSettings {
    pub n_days: usize,
    pub samples_per_day: usize,
    /// Leading share of the series used for training.
    pub train_fraction: f64,
    /// Trailing share of the series used for evaluation.
    pub test_fraction: f64,
    pub slope: f64,
    pub residual_amplitude: f64,
    pub noise_std: f64,
    pub seasonal_amplitude: f64,
    pub daily_amplitude: f64,
}

impl Default for BridgeSettings {
    fn default() -> Self {
        let p = crate::physics::BridgeParams::default();
        BridgeSettings {
            n_days: 150,
            samples_per_day: p.samples_per_day,
            train_fraction: 0.2,
            test_fraction: 0.2,
            slope: p.slope,
            residual_amplitude: p.residual_amplitude,
            noise_std: p.noise_std,
            seasonal_amplitude: p.seasonal_amplitude,
            daily_amplitude: p.daily_amplitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamSettings {
    pub length: f64,
    pub fundamental_hz: f64,
    pub damping_ratios: Vec<f64>,
    pub dt: f64,
    pub n_steps: usize,
    pub n_sensors: usize,
    /// Training keeps every `time_stride`-th step ...
    pub time_stride: usize,
    /// ... within this leading share of the record.
    pub train_fraction: f64,
    pub n_eval_points: usize,
    pub noise_std: f64,
    /// Bounds on the spatial factor's signal variance, which trades off
    /// against the temporal amplitudes.
    pub spatial_variance_bounds: [f64; 2],
}

impl Default for BeamSettings {
    fn default() -> Self {
        BeamSettings {
            length: 1.0,
            fundamental_hz: 1.5,
            damping_ratios: vec![0.02, 0.02],
            dt: 0.02,
            n_steps: 200,
            n_sensors: 8,
            time_stride: 2,
            train_fraction: 0.5,
            n_eval_points: 100,
            noise_std: 0.03,
            spatial_variance_bounds: [0.5, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlateSettings {
    pub nx: usize,
    pub ny: usize,
    /// Mask file ('.' inside, '#' masked); replaces the built-in three-hole plate.
    pub mask_file: Option<PathBuf>,
    /// Basis size of the constrained model.
    pub basis_size: usize,
    /// Number of eigenfunctions in the synthetic target.
    pub target_modes: usize,
    pub target_length_scale: f64,
    pub noise_std: f64,
    /// Training grid strides, densest first.
    pub strides: Vec<usize>,
    /// Independent target fields per stride; stride metrics average over them.
    pub replicates: usize,
}

impl Default for PlateSettings {
    fn default() -> Self {
        PlateSettings {
            nx: 64,
            ny: 64,
            mask_file: None,
            basis_size: 64,
            target_modes: 40,
            target_length_scale: 0.4,
            noise_std: 0.01,
            strides: vec![2, 4, 8],
            replicates: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentId,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Add observation noise to the reported predictive bands.
    #[serde(default)]
    pub include_noise_variance: bool,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub sdof: SdofSettings,
    #[serde(default)]
    pub bridge: BridgeSettings,
    #[serde(default)]
    pub beam: BeamSettings,
    #[serde(default)]
    pub plate: PlateSettings,
}

impl ExperimentConfig {
    /// Default settings for `experiment`.
    pub fn new(experiment: ExperimentId, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            experiment,
            seed,
            output_dir: None,
            include_noise_variance: false,
            optimizer: OptimizerConfig::default(),
            sdof: SdofSettings::default(),
            bridge: BridgeSettings::default(),
            beam: BeamSettings::default(),
            plate: PlateSettings::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let (Some(dir), Some(mask)) = (path.parent(), cfg.plate.mask_file.as_mut()) {
            if mask.is_relative() {
                *mask = dir.join(&*mask);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.optimizer.n_starts == Some(0) {
            return bad("optimizer.n_starts must be at least 1".into());
        }
        let s = &self.sdof;
        if !(s.natural_frequency_hz > 0.0 && s.dt > 0.0 && s.response_std > 0.0 && s.noise_std >= 0.0) {
            return bad("sdof: frequency, dt and response_std must be > 0, noise_std >= 0".into());
        }
        if s.keep_every == 0 || s.n_points < 2 * s.keep_every {
            return bad("sdof: keep_every must be >= 1 and leave at least two training points".into());
        }
        if let Some([lo, hi]) = s.frequency_band {
            if !(lo > 0.0 && lo < hi) {
                return bad(format!("sdof.frequency_band must satisfy 0 < lo < hi, got [{lo}, {hi}]"));
            }
        }
        let b = &self.bridge;
        if b.n_days < 60 || b.samples_per_day == 0 {
            return bad("bridge: n_days must be >= 60 and samples_per_day >= 1".into());
        }
        if !(b.train_fraction > 0.0 && b.test_fraction > 0.0 && b.train_fraction + b.test_fraction <= 1.0) {
            return bad("bridge: train and test fractions must be positive and not overlap".into());
        }
        let m = &self.beam;
        if m.damping_ratios.is_empty() || m.n_sensors == 0 || m.time_stride == 0 || m.n_eval_points < 2 {
            return bad("beam: need modes, sensors, a time stride and at least two evaluation points".into());
        }
        if !(m.train_fraction > 0.0 && m.train_fraction <= 1.0 && m.dt > 0.0 && m.fundamental_hz > 0.0) {
            return bad("beam: train_fraction in (0, 1], dt and fundamental_hz > 0".into());
        }
        let [lo, hi] = m.spatial_variance_bounds;
        if !(lo > 0.0 && lo < hi) {
            return bad("beam.spatial_variance_bounds must satisfy 0 < lo < hi".into());
        }
        let p = &self.plate;
        if p.strides.is_empty() || p.strides.contains(&0) || p.basis_size == 0 || p.target_modes == 0 || p.replicates == 0 {
            return bad("plate: strides, basis_size, target_modes and replicates must be positive".into());
        }
        if let Some(f) = &p.mask_file {
            if !f.is_file() {
                return bad(format!("plate.mask_file {} does not exist", f.display()));
            }
        }
        Ok(())
    }
}
