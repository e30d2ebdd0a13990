use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::mean::MeanFunction;
use crate::optim::OptimizationResult;

pub const BASELINE: &str = "baseline";
pub const PHYSICS_INFORMED: &str = "physics_informed";

/// Outcome of one experiment: both models' metrics plus experiment-specific scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub experiment: String,
    pub seed: u64,
    pub nmse_convention: String,
    pub log_loss_convention: String,
    /// What NMSE compares against.
    pub evaluation_target: String,
    /// Wall-clock time; the only field allowed to differ between identical runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
    pub summary: BTreeMap<String, f64>,
    pub models: BTreeMap<String, ModelReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub kernel: String,
    pub mean: String,
    pub nmse: f64,
    pub log_loss: f64,
    pub jitter_used: f64,
    pub log_marginal_likelihood: f64,
    pub hyperparameters: BTreeMap<String, f64>,
    pub optimizer: OptimizerSummary,
    /// Per-mode NMSE, keyed like `spatial_mode_1`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_mode: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSummary {
    pub n_starts: usize,
    pub converged_starts: usize,
    pub failed_starts: usize,
    /// Index of the winning start.
    pub best_start: usize,
    pub total_iterations: usize,
}

impl OptimizerSummary {
    pub fn from_result(r: &OptimizationResult) -> OptimizerSummary {
        let t = &r.per_start_trace;
        OptimizerSummary {
            n_starts: t.len(),
            converged_starts: t.iter().filter(|s| s.converged).count(),
            failed_starts: t.iter().filter(|s| s.final_lml.is_none()).count(),
            best_start: t.iter().position(|s| s.final_params == r.best_params).unwrap_or(0),
            total_iterations: t.iter().map(|s| s.iterations).sum(),
        }
    }
}

impl MetricsReport {
    pub fn validate(&self) -> Result<()> {
        for (name, m) in &self.models {
            if !(m.nmse >= 0.0 && m.nmse.is_finite()) {
                return Err(Error::Numeric(format!("{name}: nmse {} is not finite and non-negative", m.nmse)));
            }
            if !m.log_loss.is_finite() {
                return Err(Error::Numeric(format!("{name}: log loss {} is not finite", m.log_loss)));
            }
        }
        Ok(())
    }

    pub fn model(&self, name: &str) -> Result<&ModelReport> {
        self.models
            .get(name)
            .ok_or_else(|| Error::invalid(format!("report has no model '{name}'")))
    }

    pub fn summary_value(&self, key: &str) -> Result<f64> {
        self.summary
            .get(key)
            .copied()
            .ok_or_else(|| Error::invalid(format!("report has no summary entry '{key}'")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Numeric(format!("cannot serialize report: {e}")))
    }

    /// The report without its runtime, which is byte-identical across reruns.
    pub fn deterministic_toml(&self) -> Result<String> {
        MetricsReport {
            runtime_seconds: None,
            ..self.clone()
        }
        .to_toml()
    }

    pub fn from_toml(text: &str) -> Result<MetricsReport> {
        toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(1, |s| text[..s.start].lines().count().max(1)),
            message: e.message().to_string(),
        })
    }

    /// Plain-text side-by-side summary.
    pub fn render_text(&self) -> String {
        let mut s = format!("experiment {} (seed {})\n", self.experiment, self.seed);
        if let Some(t) = self.runtime_seconds {
            s += &format!("runtime {t:.2} s\n");
        }
        for (name, m) in &self.models {
            s += &format!(
                "{name:>16}: nmse {:.4e}  log_loss {:.4}  lml {:.4}  jitter {:.1e}  [{}]\n",
                m.nmse, m.log_loss, m.log_marginal_likelihood, m.jitter_used, m.kernel
            );
            for (k, v) in &m.per_mode {
                s += &format!("{:>16}  {k} {v:.4e}\n", "");
            }
        }
        for (k, v) in &self.summary {
            s += &format!("{k} = {v:.6e}\n");
        }
        s
    }
}

/// Compact structural description, e.g. `sum(product(mdof[2]@[0], se@[1]), white_noise)`.
pub fn describe_kernel(k: &Kernel) -> String {
    match k {
        Kernel::SquaredExponential { .. } => "se".into(),
        Kernel::WhiteNoise { .. } => "white_noise".into(),
        Kernel::Sdof(_) => "sdof".into(),
        Kernel::Mdof(m) => format!("mdof[{}]", m.len()),
        Kernel::Constrained(c) => format!("constrained[{}]", c.basis.size()),
        Kernel::Sum { terms } => format!("sum({})", terms.iter().map(describe_kernel).collect::<Vec<_>>().join(", ")),
        Kernel::Product { factors } => format!(
            "product({})",
            factors
                .iter()
                .map(|f| format!("{}@{:?}", describe_kernel(&f.kernel), f.slice))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

pub fn describe_mean(m: &MeanFunction) -> String {
    match m {
        MeanFunction::Zero => "zero".into(),
        MeanFunction::Linear {
            weights,
            intercept,
            covariate_slice,
        } => format!("linear(columns {covariate_slice:?}, weights {weights:?}, intercept {intercept})"),
    }
}
