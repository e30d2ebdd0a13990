//! Stationary autocovariance of a damped oscillator under white-noise forcing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Admissible damping ratios. The covariance divides by both the damping ratio
/// and the damped frequency.
pub const DAMPING_RATIO_RANGE: (f64, f64) = (1e-4, 0.999);

/// Parameters of a single-degree-of-freedom covariance.
///
/// `amplitude` is the forcing variance over four times the squared mass,
/// the only combination in which those two quantities appear.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSdof")]
pub struct SdofParams {
    pub natural_frequency: f64,
    pub damping_ratio: f64,
    pub amplitude: f64,
}

#[derive(Deserialize)]
struct RawSdof {
    natural_frequency: f64,
    damping_ratio: f64,
    amplitude: f64,
}

impl TryFrom<RawSdof> for SdofParams {
    type Error = Error;
    fn try_from(r: RawSdof) -> Result<Self> {
        SdofParams::new(r.natural_frequency, r.damping_ratio, r.amplitude)
    }
}

impl SdofParams {
    pub fn new(natural_frequency: f64, damping_ratio: f64, amplitude: f64) -> Result<Self> {
        if !(natural_frequency > 0.0 && natural_frequency.is_finite()) {
            return Err(Error::invalid(format!(
                "natural frequency must be finite and > 0, got {natural_frequency}"
            )));
        }
        let (lo, hi) = DAMPING_RATIO_RANGE;
        if !(lo..=hi).contains(&damping_ratio) {
            return Err(Error::invalid(format!(
                "damping ratio must lie in [{lo}, {hi}], got {damping_ratio}"
            )));
        }
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::invalid(format!(
                "amplitude must be finite and > 0, got {amplitude}"
            )));
        }
        Ok(SdofParams {
            natural_frequency,
            damping_ratio,
            amplitude,
        })
    }

    /// Builds the parameters from physical mass, damping, stiffness and forcing intensity.
    pub fn from_physical(mass: f64, damping: f64, stiffness: f64, forcing_variance: f64) -> Result<Self> {
        if !(mass > 0.0 && stiffness > 0.0) {
            return Err(Error::invalid("mass and stiffness must be > 0"));
        }
        let wn = (stiffness / mass).sqrt();
        let zeta = damping / (2.0 * (stiffness * mass).sqrt());
        SdofParams::new(wn, zeta, forcing_variance / (4.0 * mass * mass))
    }

    pub fn damped_frequency(&self) -> f64 {
        self.natural_frequency * (1.0 - self.damping_ratio * self.damping_ratio).sqrt()
    }

    /// Covariance at zero lag.
    pub fn variance(&self) -> f64 {
        self.amplitude / (self.damping_ratio * self.natural_frequency.powi(3))
    }
}

/// Modes of a multi-degree-of-freedom covariance, ordered by natural frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModalSet")]
pub struct ModalSet {
    modes: Vec<SdofParams>,
}

#[derive(Deserialize)]
struct RawModalSet {
    modes: Vec<SdofParams>,
}

impl TryFrom<RawModalSet> for ModalSet {
    type Error = Error;
    fn try_from(r: RawModalSet) -> Result<Self> {
        ModalSet::new(r.modes)
    }
}

impl ModalSet {
    pub fn new(modes: Vec<SdofParams>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::invalid("modal set must contain at least one mode"));
        }
        if modes
            .windows(2)
            .any(|w| w[0].natural_frequency >= w[1].natural_frequency)
        {
            return Err(Error::invalid(
                "modal natural frequencies must be strictly increasing",
            ));
        }
        Ok(ModalSet { modes })
    }

    pub fn modes(&self) -> &[SdofParams] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

/// Single-mode covariance at lag `tau`.
pub fn eval_sdof(tau: f64, params: &SdofParams) -> Result<f64> {
    if !tau.is_finite() {
        return Err(Error::invalid(format!("lag must be finite, got {tau}")));
    }
    Ok(sdof_value(tau, params))
}

/// Sum of single-mode covariances over all modes.
pub fn eval_mdof(tau: f64, modes: &[SdofParams]) -> Result<f64> {
    if modes.is_empty() {
        return Err(Error::invalid("modal set must contain at least one mode"));
    }
    if !tau.is_finite() {
        return Err(Error::invalid(format!("lag must be finite, got {tau}")));
    }
    Ok(modes.iter().map(|m| sdof_value(tau, m)).sum())
}

#[inline]
pub(crate) fn sdof_value(tau: f64, p: &SdofParams) -> f64 {
    let s = tau.abs();
    let alpha = p.damping_ratio * p.natural_frequency;
    let beta = p.damped_frequency();
    let (sin, cos) = (beta * s).sin_cos();
    p.variance() * (-alpha * s).exp() * (cos + alpha / beta * sin)
}

/// Derivatives of the covariance with respect to
/// `(ln natural_frequency, ln damping_ratio, ln amplitude)`.
pub(crate) fn sdof_log_gradient(tau: f64, p: &SdofParams) -> [f64; 3] {
    let s = tau.abs();
    let zeta = p.damping_ratio;
    let alpha = zeta * p.natural_frequency;
    let beta = p.damped_frequency();
    let a = p.variance();
    let (sin, cos) = (beta * s).sin_cos();
    let e = (-alpha * s).exp();
    let g = e * (cos + alpha / beta * sin);
    let g_alpha = -s * g + e * sin / beta;
    let g_beta = e * (-s * sin - alpha / (beta * beta) * sin + alpha / beta * s * cos);
    let k = a * g;
    let d_omega = -3.0 * k + a * (alpha * g_alpha + beta * g_beta);
    let d_zeta = -k + a * (alpha * g_alpha - beta * zeta * zeta / (1.0 - zeta * zeta) * g_beta);
    [d_omega, d_zeta, k]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn p() -> SdofParams {
        SdofParams::new(2.0 * PI, 0.1, 0.25).unwrap()
    }

    #[test]
    fn zero_lag_is_variance() {
        let p = p();
        let v = eval_sdof(0.0, &p).unwrap();
        assert!((v - 0.25 / (0.1 * (2.0 * PI).powi(3))).abs() < 1e-15);
    }

    #[test]
    fn even_in_lag() {
        let p = p();
        for tau in [0.01, 0.3, 1.7, 12.0] {
            assert_eq!(eval_sdof(tau, &p).unwrap(), eval_sdof(-tau, &p).unwrap());
        }
    }

    /// Direct substitution, written out independently of `sdof_value`.
    #[test]
    fn reference_value_at_half_second() {
        let (a, z, wn, tau) = (0.25f64, 0.1f64, 2.0 * PI, 0.5f64);
        let wd = wn * (1.0 - z * z).sqrt();
        let expected = a / (z * wn * wn * wn)
            * (-z * wn * tau).exp()
            * ((wd * tau).cos() + z * wn / wd * (wd * tau).sin());
        let got = eval_sdof(tau, &p()).unwrap();
        assert!((got - expected).abs() < 1e-15 * expected.abs().max(1e-3));
        assert!((got - SPECTRAL_ORACLE_HALF_SECOND).abs() < 1e-9);
    }

    // (4a/pi) * integral_0^inf cos(w tau) / ((wn^2 - w^2)^2 + (2 zeta wn w)^2) dw,
    // i.e. the inverse Fourier transform of the response power spectral density,
    // evaluated with QUADPACK's oscillatory-weight routine and frozen here.
    const SPECTRAL_ORACLE_HALF_SECOND: f64 = -0.007348876814997777;

    #[test]
    fn rejects_bad_parameters() {
        assert!(SdofParams::new(1.0, 0.0, 1.0).is_err());
        assert!(SdofParams::new(1.0, 1.0, 1.0).is_err());
        assert!(SdofParams::new(-1.0, 0.1, 1.0).is_err());
        assert!(SdofParams::new(1.0, 0.1, 0.0).is_err());
        assert!(eval_sdof(f64::NAN, &p()).is_err());
    }

    #[test]
    fn modal_sum() {
        let m1 = p();
        let m2 = SdofParams::new(9.0, 0.05, 1.3).unwrap();
        assert_eq!(eval_mdof(0.37, &[m1]).unwrap(), eval_sdof(0.37, &m1).unwrap());
        let two = eval_mdof(0.37, &[m1, m1]).unwrap();
        assert!((two - 2.0 * eval_sdof(0.37, &m1).unwrap()).abs() < 1e-15);
        let both = eval_mdof(0.0, &[m1, m2]).unwrap();
        let expected = 0.25 / (0.1 * (2.0 * PI).powi(3)) + 1.3 / (0.05 * 729.0);
        assert!((both - expected).abs() < 1e-14);
        assert!(eval_mdof(0.0, &[]).is_err());
    }

    #[test]
    fn modal_set_must_be_ordered() {
        let m1 = p();
        let m2 = SdofParams::new(9.0, 0.05, 1.3).unwrap();
        assert!(ModalSet::new(vec![m1, m2]).is_ok());
        assert!(ModalSet::new(vec![m2, m1]).is_err());
        assert!(ModalSet::new(vec![]).is_err());
    }

    #[test]
    fn log_gradient_matches_finite_differences() {
        let base = SdofParams::new(3.1, 0.23, 0.7).unwrap();
        let h = 1e-6;
        for tau in [0.0, 0.05, 0.4, -1.3, 2.9] {
            let g = sdof_log_gradient(tau, &base);
            let shifted = |i: usize, d: f64| {
                let mut v = [base.natural_frequency, base.damping_ratio, base.amplitude];
                v[i] *= d.exp();
                sdof_value(tau, &SdofParams::new(v[0], v[1], v[2]).unwrap())
            };
            for (i, gi) in g.iter().enumerate() {
                let fd = (shifted(i, h) - shifted(i, -h)) / (2.0 * h);
                assert!((gi - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "tau={tau} i={i} {gi} vs {fd}");
            }
        }
    }
}
