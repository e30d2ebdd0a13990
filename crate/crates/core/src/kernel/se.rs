use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of the squared-exponential covariance with a white-noise term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeParams {
    pub signal_variance: f64,
    pub length_scales: Vec<f64>,
    pub noise_variance: f64,
}

impl SeParams {
    pub fn new(signal_variance: f64, length_scales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        let p = SeParams {
            signal_variance,
            length_scales,
            noise_variance,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_se(self.signal_variance, &self.length_scales)?;
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::invalid(format!(
                "noise variance must be finite and >= 0, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_se(signal_variance: f64, length_scales: &[f64]) -> Result<()> {
    if !(signal_variance > 0.0 && signal_variance.is_finite()) {
        return Err(Error::invalid(format!(
            "signal variance must be finite and > 0, got {signal_variance}"
        )));
    }
    if length_scales.is_empty() {
        return Err(Error::invalid("at least one length scale is required"));
    }
    if let Some(l) = length_scales.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::invalid(format!("length scales must be finite and > 0, got {l}")));
    }
    Ok(())
}

/// Squared-exponential covariance plus white noise on the matched-observation diagonal.
///
/// `same_index` marks that `xp` and `xq` are the same observation; only then is
/// `noise_variance` added.
pub fn eval_se(xp: &[f64], xq: &[f64], same_index: bool, params: &SeParams) -> Result<f64> {
    let d = params.length_scales.len();
    if xp.len() != d || xq.len() != d {
        return Err(Error::invalid(format!(
            "SE kernel has {d} length scales but inputs have dimension {} and {}",
            xp.len(),
            xq.len()
        )));
    }
    let noise = if same_index { params.noise_variance } else { 0.0 };
    Ok(se_value(xp, xq, params.signal_variance, &params.length_scales) + noise)
}

#[inline]
pub(crate) fn se_value(xp: &[f64], xq: &[f64], signal_variance: f64, length_scales: &[f64]) -> f64 {
    let r2: f64 = xp
        .iter()
        .zip(xq)
        .zip(length_scales)
        .map(|((a, b), l)| {
            let u = (a - b) / l;
            u * u
        })
        .sum();
    signal_variance * (-0.5 * r2).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_only_on_matched_diagonal() {
        let p = SeParams::new(1.0, vec![1.0], 0.1).unwrap();
        let v = eval_se(&[0.3], &[0.3], true, &p).unwrap();
        assert!((v - 1.1).abs() < 1e-15);
        let v = eval_se(&[0.3], &[0.3], false, &p).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unit_distance_value() {
        let p = SeParams::new(2.0, vec![1.0], 0.0).unwrap();
        let v = eval_se(&[0.0], &[1.0], false, &p).unwrap();
        assert!((v - 2.0 * (-0.5f64).exp()).abs() < 1e-15);
        assert!((v - 1.21306).abs() < 1e-5);
    }

    #[test]
    fn decays_to_zero_far_away() {
        let p = SeParams::new(1.0, vec![1.0, 2.0], 0.5).unwrap();
        let v = eval_se(&[0.0, 0.0], &[100.0, 0.0], false, &p).unwrap();
        assert!(v < 1e-300);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = SeParams::new(1.0, vec![1.0, 1.0], 0.0).unwrap();
        assert!(matches!(
            eval_se(&[0.0], &[1.0], false, &p),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(SeParams::new(0.0, vec![1.0], 0.0).is_err());
        assert!(SeParams::new(1.0, vec![-1.0], 0.0).is_err());
        assert!(SeParams::new(1.0, vec![], 0.0).is_err());
        assert!(SeParams::new(1.0, vec![1.0], -0.1).is_err());
    }
}
