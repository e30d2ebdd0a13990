use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::Trajectory;
use crate::error::{Error, Result};

/// Points used to normalize shapes and integrate modal masses.
const FINE_GRID: usize = 4001;

/// Uniform Euler-Bernoulli cantilever, clamped at `x = 0`, struck once at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSpec {
    pub length: f64,
    /// One damping ratio per retained mode.
    pub damping_ratios: Vec<f64>,
    /// Fundamental natural frequency (rad/s); higher modes scale by `(beta_i / beta_1)^2`.
    pub fundamental_frequency: f64,
    /// Overrides the Euler-Bernoulli ratios when present.
    pub modal_frequencies: Option<Vec<f64>>,
    pub mass_per_length: f64,
    pub impulse_location: f64,
    pub impulse_magnitude: f64,
}

impl BeamSpec {
    pub fn n_modes(&self) -> usize {
        self.damping_ratios.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.damping_ratios.is_empty() {
            return Err(Error::invalid("beam needs at least one mode"));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::invalid(format!("beam length must be > 0, got {}", self.length)));
        }
        if self.damping_ratios.iter().any(|z| !(*z > 0.0 && *z < 1.0)) {
            return Err(Error::invalid("modal damping ratios must lie in (0, 1)"));
        }
        if !(self.fundamental_frequency > 0.0 && self.mass_per_length > 0.0) {
            return Err(Error::invalid("fundamental frequency and mass per length must be > 0"));
        }
        if let Some(w) = &self.modal_frequencies {
            if w.len() != self.n_modes() || w.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::invalid("need one positive modal frequency per damping ratio"));
            }
        }
        if !(0.0..=self.length).contains(&self.impulse_location) {
            return Err(Error::invalid("impulse must be applied on the beam"));
        }
        Ok(())
    }

    pub fn frequencies(&self) -> Result<Vec<f64>> {
        if let Some(w) = &self.modal_frequencies {
            return Ok(w.clone());
        }
        let roots = beam_roots(self.n_modes())?;
        Ok(roots.iter().map(|r| self.fundamental_frequency * (r / roots[0]).powi(2)).collect())
    }
}

/// First `n` roots of `cos(z) cosh(z) = -1`, by bisection to 1e-12.
pub fn beam_roots(n: usize) -> Result<Vec<f64>> {
    // same sign as cos(z) cosh(z) + 1, without overflow
    let g = |z: f64| z.cos() + 1.0 / z.cosh();
    (1..=n)
        .map(|i| {
            let (mut a, mut b) = ((i - 1) as f64 * PI, i as f64 * PI);
            let (ga, gb) = (g(a), g(b));
            if ga * gb >= 0.0 {
                return Err(Error::Numeric(format!("no sign change bracketing beam root {i}")));
            }
            while b - a > 1e-12 {
                let m = 0.5 * (a + b);
                if (g(m) > 0.0) == (ga > 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            Ok(0.5 * (a + b))
        })
        .collect()
}

/// Clamped-free mode shapes, scaled to unit maximum magnitude with a positive tip.
#[derive(Debug, Clone)]
pub struct BeamModes {
    length: f64,
    /// `beta_i` (1 / m).
    betas: Vec<f64>,
    /// `1 - sigma_i`, evaluated without cancellation.
    one_minus_sigma: Vec<f64>,
    scales: Vec<f64>,
}

impl BeamModes {
    pub fn new(length: f64, n_modes: usize) -> Result<BeamModes> {
        if !(length > 0.0) || n_modes == 0 {
            return Err(Error::invalid("beam modes need positive length and at least one mode"));
        }
        let roots = beam_roots(n_modes)?;
        let one_minus_sigma = roots
            .iter()
            .map(|&z| (-(-z).exp() + z.sin() - z.cos()) / (z.sinh() + z.sin()))
            .collect();
        let mut modes = BeamModes {
            length,
            betas: roots.iter().map(|r| r / length).collect(),
            one_minus_sigma,
            scales: vec![1.0; n_modes],
        };
        for i in 0..n_modes {
            let mut peak = 0.0f64;
            for k in 0..FINE_GRID {
                let x = length * k as f64 / (FINE_GRID - 1) as f64;
                let v = modes.raw(i, x);
                peak = peak.max(v.abs());
            }
            let tip = modes.raw(i, length);
            modes.scales[i] = tip.signum() / peak;
        }
        Ok(modes)
    }

    pub fn n_modes(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    fn raw(&self, i: usize, x: f64) -> f64 {
        let u = self.betas[i] * x;
        let oms = self.one_minus_sigma[i];
        // cosh u - sigma sinh u, split into growing and decaying exponentials
        let hyper = 0.5 * u.exp() * oms + 0.5 * (-u).exp() * (2.0 - oms);
        hyper - u.cos() + (1.0 - oms) * u.sin()
    }

    pub fn value(&self, i: usize, x: f64) -> f64 {
        self.scales[i] * self.raw(i, x)
    }

    /// `d phi_i / dx`.
    pub fn slope(&self, i: usize, x: f64) -> f64 {
        let b = self.betas[i];
        let u = b * x;
        let oms = self.one_minus_sigma[i];
        // sinh u - sigma cosh u
        let hyper = 0.5 * u.exp() * oms - 0.5 * (-u).exp() * (2.0 - oms);
        self.scales[i] * b * (hyper + u.sin() + (1.0 - oms) * u.cos())
    }

    /// `integral_0^L phi_i phi_j dx` by composite Simpson on the fine grid.
    pub fn overlap(&self, i: usize, j: usize) -> f64 {
        let n = FINE_GRID - 1;
        let h = self.length / n as f64;
        let f = |k: usize| {
            let x = h * k as f64;
            self.value(i, x) * self.value(j, x)
        };
        let mut s = f(0) + f(n);
        for k in 1..n {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k);
        }
        s * h / 3.0
    }
}

/// `len(x_points) x n_modes` matrix of mode shapes.
pub fn beam_mode_shapes(spec: &BeamSpec, x_points: &[f64]) -> Result<DMatrix<f64>> {
    spec.validate()?;
    check_points(spec, x_points)?;
    let modes = BeamModes::new(spec.length, spec.n_modes())?;
    Ok(DMatrix::from_fn(x_points.len(), spec.n_modes(), |r, c| modes.value(c, x_points[r])))
}

fn check_points(spec: &BeamSpec, x_points: &[f64]) -> Result<()> {
    match x_points.iter().find(|x| !(0.0..=spec.length).contains(*x)) {
        Some(x) => Err(Error::invalid(format!("point {x} is off the beam [0, {}]", spec.length))),
        None => Ok(()),
    }
}

/// Response field with its modal decomposition.
#[derive(Debug, Clone)]
pub struct BeamResponse {
    pub trajectory: Trajectory,
    /// `n_steps x n_modes` modal coordinates `q_i(t)`.
    pub modal_coordinates: DMatrix<f64>,
    /// `len(x_points) x n_modes` mode shapes at the output points.
    pub shapes: DMatrix<f64>,
    pub frequencies: Vec<f64>,
}

/// `y(x, t) = sum_i phi_i(x) q_i(t)` with each `q_i` the free decay of a damped
/// oscillator started by the modal share of the impulse.
pub fn simulate_beam(spec: &BeamSpec, dt: f64, n_steps: usize, x_points: &[f64]) -> Result<BeamResponse> {
    spec.validate()?;
    check_points(spec, x_points)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step must be > 0, got {dt}")));
    }
    let modes = BeamModes::new(spec.length, spec.n_modes())?;
    let freqs = spec.frequencies()?;
    let times: Vec<f64> = (0..n_steps).map(|k| k as f64 * dt).collect();
    let modal = DMatrix::from_fn(n_steps, spec.n_modes(), |k, i| {
        let (w, z) = (freqs[i], spec.damping_ratios[i]);
        let wd = w * (1.0 - z * z).sqrt();
        let modal_mass = spec.mass_per_length * modes.overlap(i, i);
        let v0 = spec.impulse_magnitude * modes.value(i, spec.impulse_location) / modal_mass;
        let t = times[k];
        v0 / wd * (-z * w * t).exp() * (wd * t).sin()
    });
    let shapes = DMatrix::from_fn(x_points.len(), spec.n_modes(), |r, c| modes.value(c, x_points[r]));
    let values = &modal * shapes.transpose();

    let mut meta = BTreeMap::from([
        ("length".to_string(), spec.length),
        ("impulse_location".to_string(), spec.impulse_location),
        ("impulse_magnitude".to_string(), spec.impulse_magnitude),
        ("mass_per_length".to_string(), spec.mass_per_length),
        ("dt".to_string(), dt),
    ]);
    for (i, (w, z)) in freqs.iter().zip(&spec.damping_ratios).enumerate() {
        meta.insert(format!("mode{}_frequency", i + 1), *w);
        meta.insert(format!("mode{}_damping_ratio", i + 1), *z);
    }
    Ok(BeamResponse {
        trajectory: Trajectory {
            times,
            values,
            meta,
            seed: None,
        },
        modal_coordinates: modal,
        shapes,
        frequencies: freqs,
    })
}
