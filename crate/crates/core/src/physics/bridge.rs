use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::gp::TrainingSet;

/// Generator settings for a cable-extension-like displacement series driven by
/// air temperature. Times are in days, temperatures in degrees C, displacements in mm.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeParams {
    pub samples_per_day: usize,
    pub mean_temperature: f64,
    /// Annual cycle amplitude; the series starts at the warm peak.
    pub seasonal_amplitude: f64,
    pub daily_amplitude: f64,
    /// Hour of the daily temperature maximum.
    pub daily_peak_hour: f64,
    /// Standard deviation of sample-to-sample weather fluctuation.
    pub weather_std: f64,
    /// Displacement per degree.
    pub slope: f64,
    /// Temperature at which the linear trend crosses zero.
    pub reference_temperature: f64,
    /// Amplitude of a twice-daily load pattern unrelated to temperature.
    pub residual_amplitude: f64,
    pub noise_std: f64,
}

impl Default for BridgeParams {
    fn default() -> Self {
        BridgeParams {
            samples_per_day: 8,
            mean_temperature: 11.0,
            seasonal_amplitude: 8.0,
            daily_amplitude: 4.0,
            daily_peak_hour: 15.0,
            weather_std: 0.5,
            slope: -2.0,
            reference_temperature: 11.0,
            residual_amplitude: 3.0,
            noise_std: 0.5,
        }
    }
}

impl BridgeParams {
    pub fn intercept(&self) -> f64 {
        -self.slope * self.reference_temperature
    }
}

#[derive(Debug, Clone)]
pub struct BridgeSeries {
    /// Inputs `(time in days, temperature)`, target displacement.
    pub data: TrainingSet,
    /// Displacement without observation noise.
    pub latent: DVector<f64>,
    pub params: BridgeParams,
    pub seed: u64,
}

pub fn synth_bridge_series(seed: u64, n_days: usize) -> Result<BridgeSeries> {
    synth_bridge_series_with(&BridgeParams::default(), seed, n_days)
}

pub fn synth_bridge_series_with(params: &BridgeParams, seed: u64, n_days: usize) -> Result<BridgeSeries> {
    if n_days < 60 {
        return Err(Error::invalid(format!("bridge series needs at least 60 days, got {n_days}")));
    }
    if params.samples_per_day == 0 || params.weather_std < 0.0 || params.noise_std < 0.0 {
        return Err(Error::invalid("invalid bridge generator settings"));
    }
    let n = n_days * params.samples_per_day;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weather = Normal::new(0.0, params.weather_std).map_err(|e| Error::invalid(e.to_string()))?;
    let noise = Normal::new(0.0, params.noise_std).map_err(|e| Error::invalid(e.to_string()))?;

    let mut x = DMatrix::zeros(n, 2);
    let mut latent = DVector::zeros(n);
    let mut y = DVector::zeros(n);
    for k in 0..n {
        let t = k as f64 / params.samples_per_day as f64;
        let temp = params.mean_temperature
            + params.seasonal_amplitude * (2.0 * PI * t / 365.0).cos()
            + params.daily_amplitude * (2.0 * PI * (t - params.daily_peak_hour / 24.0)).cos()
            + weather.sample(&mut rng);
        let residual = params.residual_amplitude * (4.0 * PI * (t - 8.0 / 24.0)).cos();
        x[(k, 0)] = t;
        x[(k, 1)] = temp;
        latent[k] = params.intercept() + params.slope * temp + residual;
        y[k] = latent[k] + noise.sample(&mut rng);
    }
    Ok(BridgeSeries {
        data: TrainingSet::new(x, y)?,
        latent,
        params: params.clone(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mean::{fit_linear_mean, MeanFunction};

    #[test]
    fn noiseless_series_is_affine_in_temperature() {
        let p = BridgeParams {
            residual_amplitude: 0.0,
            noise_std: 0.0,
            ..Default::default()
        };
        let s = synth_bridge_series_with(&p, 1, 60).unwrap();
        for k in 0..s.data.len() {
            let expect = p.intercept() + p.slope * s.data.x()[(k, 1)];
            assert!((s.data.y()[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn full_series_slope_is_recovered() {
        let s = synth_bridge_series(7, 150).unwrap();
        let MeanFunction::Linear { weights, .. } = fit_linear_mean(s.data.x(), s.data.y(), &[1]).unwrap() else {
            unreachable!()
        };
        assert!(((weights[0] - s.params.slope) / s.params.slope).abs() < 0.02, "{}", weights[0]);
    }

    #[test]
    fn first_month_is_a_narrower_temperature_regime() {
        let s = synth_bridge_series(3, 150).unwrap();
        let temps = s.data.x().column(1);
        let month = 30 * s.params.samples_per_day;
        let range = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
        let all: Vec<f64> = temps.iter().copied().collect();
        assert!(range(&all[..month]) < range(&all));
    }

    #[test]
    fn seeded_and_validated() {
        let a = synth_bridge_series(5, 60).unwrap();
        let b = synth_bridge_series(5, 60).unwrap();
        assert_eq!(a.data, b.data);
        assert!(synth_bridge_series(5, 59).is_err());
    }
}
