use std::f64::consts::PI;

use crate::error::{Error, Result};

/// How NMSE is normalized, as written into reports.
pub const NMSE_CONVENTION: &str = "sum((y_true - y_pred)^2) / (N * var(y_true)); predicting mean(y_true) scores 1";
/// How log loss is signed, as written into reports.
pub const LOG_LOSS_CONVENTION: &str =
    "mean over points of 0.5*ln(2*pi*v) + (y - mu)^2 / (2*v), v including observation noise; lower is better";

/// Normalized mean squared error.
pub fn metric_nmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() || y_true.len() < 2 {
        return Err(Error::invalid(format!(
            "nmse needs equal lengths >= 2, got {} and {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    let n = y_true.len() as f64;
    let mean = y_true.iter().sum::<f64>() / n;
    let var = y_true.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    if var <= 0.0 {
        return Err(Error::DegenerateData("nmse undefined for constant truth".into()));
    }
    let sse: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(sse / (n * var))
}

/// Mean Gaussian negative log predictive density.
pub fn metric_log_loss(y_true: &[f64], pred_mean: &[f64], pred_var: &[f64]) -> Result<f64> {
    if y_true.len() != pred_mean.len() || y_true.len() != pred_var.len() || y_true.is_empty() {
        return Err(Error::invalid("log loss needs equal, non-zero lengths"));
    }
    if let Some(v) = pred_var.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::invalid(format!("predictive variance must be > 0, got {v}")));
    }
    let total: f64 = y_true
        .iter()
        .zip(pred_mean)
        .zip(pred_var)
        .map(|((y, m), v)| 0.5 * (2.0 * PI * v).ln() + (y - m).powi(2) / (2.0 * v))
        .sum();
    Ok(total / y_true.len() as f64)
}
