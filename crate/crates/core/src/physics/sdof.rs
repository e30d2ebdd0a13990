use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix2, Matrix4, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Trajectory;
use crate::error::{Error, Result};
use crate::kernel::SdofParams;

/// `m y'' + c y' + k y = F(t)` with `E[F(t) F(s)] = forcing_variance * delta(t - s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdofSystem {
    pub mass: f64,
    pub damping: f64,
    pub stiffness: f64,
    pub forcing_variance: f64,
}

impl SdofSystem {
    pub fn new(mass: f64, damping: f64, stiffness: f64, forcing_variance: f64) -> Result<SdofSystem> {
        let s = SdofSystem {
            mass,
            damping,
            stiffness,
            forcing_variance,
        };
        s.validate()?;
        Ok(s)
    }

    /// Unit-mass system with the given modal parameters and covariance amplitude `a = sigma^2 / (4 m^2)`.
    pub fn from_modal(natural_frequency: f64, damping_ratio: f64, amplitude: f64) -> Result<SdofSystem> {
        SdofSystem::new(
            1.0,
            2.0 * damping_ratio * natural_frequency,
            natural_frequency * natural_frequency,
            4.0 * amplitude,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.mass, self.damping, self.stiffness, self.forcing_variance]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.mass <= 0.0 || self.stiffness <= 0.0 || self.damping < 0.0 || self.forcing_variance < 0.0 {
            return Err(Error::invalid(format!("invalid oscillator {self:?}")));
        }
        let z = self.damping_ratio();
        if !(z > 0.0 && z < 1.0) {
            return Err(Error::invalid(format!("oscillator must be underdamped, damping ratio is {z}")));
        }
        Ok(())
    }

    pub fn natural_frequency(&self) -> f64 {
        (self.stiffness / self.mass).sqrt()
    }

    pub fn damping_ratio(&self) -> f64 {
        self.damping / (2.0 * (self.stiffness * self.mass).sqrt())
    }

    /// Covariance amplitude `sigma^2 / (4 m^2)`.
    pub fn amplitude(&self) -> f64 {
        self.forcing_variance / (4.0 * self.mass * self.mass)
    }

    /// Parameters of the matching stationary covariance. Fails for zero forcing.
    pub fn kernel_params(&self) -> Result<SdofParams> {
        SdofParams::from_physical(self.mass, self.damping, self.stiffness, self.forcing_variance)
    }

    /// Stationary covariance of `(y, y')`.
    pub fn stationary_covariance(&self) -> Matrix2<f64> {
        let (w, z, a) = (self.natural_frequency(), self.damping_ratio(), self.amplitude());
        Matrix2::new(a / (z * w.powi(3)), 0.0, 0.0, a / (z * w))
    }

    /// One-step transition and process-noise covariance for step `dt`, from the
    /// block matrix exponential of `[[-A, Q], [0, A^T]] dt`.
    pub fn discretize(&self, dt: f64) -> (Matrix2<f64>, Matrix2<f64>) {
        let a = Matrix2::new(0.0, 1.0, -self.stiffness / self.mass, -self.damping / self.mass);
        let q = Matrix2::new(0.0, 0.0, 0.0, self.forcing_variance / (self.mass * self.mass));
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(&(-a * dt));
        m.fixed_view_mut::<2, 2>(0, 2).copy_from(&(q * dt));
        m.fixed_view_mut::<2, 2>(2, 2).copy_from(&(a.transpose() * dt));
        let e = m.exp();
        let phi = e.fixed_view::<2, 2>(2, 2).transpose();
        let qd = phi * e.fixed_view::<2, 2>(0, 2);
        (phi, (qd + qd.transpose()) * 0.5)
    }
}

/// Lower factor of a 2x2 PSD matrix, tolerating exact singularity.
fn psd_root(m: &Matrix2<f64>) -> Matrix2<f64> {
    let l00 = m[(0, 0)].max(0.0).sqrt();
    let l10 = if l00 > 0.0 { m[(1, 0)] / l00 } else { 0.0 };
    let l11 = (m[(1, 1)] - l10 * l10).max(0.0).sqrt();
    Matrix2::new(l00, 0.0, l10, l11)
}

/// Displacement samples `y(i dt)`, `i = 0..n_steps`, started from the
/// stationary distribution and advanced with the exact discrete-time transition.
///
/// Requires `dt <= 0.1 * 2 pi / omega_n`.
pub fn simulate_sdof(system: &SdofSystem, dt: f64, n_steps: usize, seed: u64) -> Result<Trajectory> {
    system.validate()?;
    let period = 2.0 * std::f64::consts::PI / system.natural_frequency();
    if !(dt > 0.0 && dt <= 0.1 * period) {
        return Err(Error::invalid(format!(
            "time step {dt} must be positive and at most a tenth of the natural period {period}"
        )));
    }
    let (phi, qd) = system.discretize(dt);
    let step_root = psd_root(&qd);
    let init_root = psd_root(&system.stationary_covariance());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || Vector2::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));

    let mut state = init_root * normal();
    let mut values = DMatrix::zeros(n_steps, 1);
    for i in 0..n_steps {
        values[(i, 0)] = state[0];
        state = phi * state + step_root * normal();
    }
    let meta = BTreeMap::from([
        ("mass".to_string(), system.mass),
        ("damping".to_string(), system.damping),
        ("stiffness".to_string(), system.stiffness),
        ("forcing_variance".to_string(), system.forcing_variance),
        ("dt".to_string(), dt),
    ]);
    Ok(Trajectory {
        times: (0..n_steps).map(|i| i as f64 * dt).collect(),
        values,
        meta,
        seed: Some(seed),
    })
}
