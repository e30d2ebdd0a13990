use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gp::TrainingSet;
use crate::kernel::{Kernel, ParamKind};

const DAMPING_BOUNDS: (f64, f64) = (1e-3, 0.5);
/// Row cap for the median-distance heuristic; larger sets are strided.
const MEDIAN_ROWS: usize = 1500;

/// Box constraints on hyperparameters in natural units, named as in
/// [`Kernel::param_info`].
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.names.len() != self.lower.len() || self.lower.len() != self.upper.len() {
            return Err(Error::invalid("bounds vectors differ in length"));
        }
        for ((n, lo), hi) in self.names.iter().zip(&self.lower).zip(&self.upper) {
            if !(lo.is_finite() && hi.is_finite() && *lo > 0.0 && lo < hi) {
                return Err(Error::invalid(format!("bounds for {n} must satisfy 0 < lower < upper, got [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Replaces the bounds of the parameter called `name`.
    pub fn set(&mut self, name: &str, lower: f64, upper: f64) -> Result<()> {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::invalid(format!("no hyperparameter named {name}; known: {}", self.names.join(", "))))?;
        self.lower[i] = lower;
        self.upper[i] = upper;
        self.validate()
    }
}

/// Median Euclidean distance between distinct rows, over the given columns.
pub fn median_pairwise_distance(data: &TrainingSet, dims: &[usize]) -> f64 {
    let x = data.x();
    let stride = x.nrows().div_ceil(MEDIAN_ROWS).max(1);
    let rows: Vec<usize> = (0..x.nrows()).step_by(stride).collect();
    let mut d = Vec::with_capacity(rows.len() * rows.len() / 2);
    for (a, &i) in rows.iter().enumerate() {
        for &j in &rows[a + 1..] {
            d.push(dims.iter().map(|&c| (x[(i, c)] - x[(j, c)]).powi(2)).sum::<f64>().sqrt());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    *d.select_nth_unstable_by(mid, f64::total_cmp).1
}

/// `[2 pi / span, pi / smallest spacing]` of one input column, in rad per input unit.
fn frequency_band(data: &TrainingSet, dim: usize) -> Result<(f64, f64)> {
    let mut t: Vec<f64> = data.x().column(dim).iter().copied().collect();
    t.sort_by(f64::total_cmp);
    let span = t[t.len() - 1] - t[0];
    let min_gap = t.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 0.0).fold(f64::INFINITY, f64::min);
    if span <= 0.0 || !min_gap.is_finite() {
        return Err(Error::DegenerateData(format!("input column {dim} has no spread")));
    }
    Ok((2.0 * PI / span, PI / min_gap))
}

/// Log-uniform split of `band` into `n` disjoint sub-bands; mode `i` gets the `i`-th,
/// which keeps modal frequencies ordered throughout the search.
fn mode_band(band: (f64, f64), mode: usize, n_modes: usize) -> (f64, f64) {
    let r = (band.1 / band.0).ln() / n_modes as f64;
    let lo = band.0 * (r * mode as f64).exp();
    let hi = band.0 * (r * (mode + 1) as f64).exp();
    if n_modes == 1 {
        (lo, hi)
    } else {
        (lo * (1.0 + 1e-6), hi * (1.0 - 1e-6))
    }
}

/// Data-driven hyperparameter bounds:
/// * variances: `[1e-6, 1e2] * var(y)`;
/// * length scales: `[1e-2, 1e2] *` median pairwise distance on their columns;
/// * natural frequencies: `[2 pi / span, pi / min spacing]` of their column,
///   split into disjoint sub-bands when a kernel has several modes;
/// * damping ratios: `[1e-3, 0.5]`;
/// * amplitudes: wide enough that the oscillator variance `a / (zeta omega^3)`
///   covers the variance range anywhere in its frequency and damping box.
pub fn default_bounds(kernel: &Kernel, data: &TrainingSet) -> Result<Bounds> {
    build(kernel, data, None)
}

/// As [`default_bounds`], with every natural frequency searched in `band` (rad per
/// input unit) instead of the sampling-derived range.
pub fn default_bounds_in_band(kernel: &Kernel, data: &TrainingSet, band: (f64, f64)) -> Result<Bounds> {
    if !(band.0 > 0.0 && band.0 < band.1 && band.1.is_finite()) {
        return Err(Error::invalid(format!("frequency band must satisfy 0 < lo < hi, got {band:?}")));
    }
    build(kernel, data, Some(band))
}

fn build(kernel: &Kernel, data: &TrainingSet, band: Option<(f64, f64)>) -> Result<Bounds> {
    kernel.check_input_dim(data.dim())?;
    if data.len() < 2 {
        return Err(Error::DegenerateData("bounds need at least two training points".into()));
    }
    let y = data.y();
    let var = y.variance();
    if !(var > 0.0) {
        return Err(Error::DegenerateData("targets have zero variance".into()));
    }
    let omega = |dim: usize, mode: usize, n: usize| -> Result<(f64, f64)> {
        Ok(mode_band(band.map_or_else(|| frequency_band(data, dim), Ok)?, mode, n))
    };

    let info = kernel.param_info();
    let mut bounds = Bounds {
        names: Vec::with_capacity(info.len()),
        lower: Vec::with_capacity(info.len()),
        upper: Vec::with_capacity(info.len()),
    };
    for p in info {
        let (lo, hi) = match &p.kind {
            ParamKind::SignalVariance | ParamKind::NoiseVariance => (1e-6 * var, 1e2 * var),
            ParamKind::LengthScale { dims } => {
                let mut m = median_pairwise_distance(data, dims);
                if m <= 0.0 {
                    // mostly repeated inputs; fall back to the column spread
                    m = dims
                        .iter()
                        .map(|&c| {
                            let col = data.x().column(c);
                            col.max() - col.min()
                        })
                        .fold(0.0, f64::max);
                }
                if m <= 0.0 {
                    return Err(Error::DegenerateData(format!("inputs for {} have no spread", p.name)));
                }
                (1e-2 * m, 1e2 * m)
            }
            ParamKind::NaturalFrequency { dim, mode, n_modes } => omega(*dim, *mode, *n_modes)?,
            ParamKind::DampingRatio => DAMPING_BOUNDS,
            ParamKind::Amplitude { dim, mode, n_modes } => {
                let (w_lo, w_hi) = omega(*dim, *mode, *n_modes)?;
                (
                    1e-6 * var * DAMPING_BOUNDS.0 * w_lo.powi(3),
                    1e2 * var * DAMPING_BOUNDS.1 * w_hi.powi(3),
                )
            }
        };
        bounds.names.push(p.name);
        bounds.lower.push(lo);
        bounds.upper.push(hi);
    }
    bounds.validate()?;
    Ok(bounds)
}
