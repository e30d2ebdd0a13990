//! Covariance functions and their composition.
//!
//! A [`Kernel`] is an immutable tree: leaves are concrete covariance functions
//! (squared-exponential, white noise, single- and multi-mode oscillator, and the
//! boundary-constrained reduced-rank kernel), inner nodes are sums over a shared
//! input or products over disjoint input slices.
//!
//! Inputs are always `N x D` matrices, one point per row. Every positive
//! hyperparameter is exposed to optimizers through its natural logarithm.

mod sdof;
mod se;

pub use sdof::{eval_mdof, eval_sdof, ModalSet, SdofParams, DAMPING_RATIO_RANGE};
pub use se::{eval_se, SeParams};

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::boundary::{se_spectral_density_2d, ReducedRankBasis};
use crate::error::{Error, Result};

use sdof::{sdof_log_gradient, sdof_value};
use se::{check_se, se_value};

/// One factor of a product kernel: a kernel reading only the listed input columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub kernel: Kernel,
    pub slice: Vec<usize>,
}

/// Reduced-rank covariance over a masked 2D domain.
#[derive(Clone, Debug)]
pub struct ConstrainedKernel {
    pub basis: Arc<ReducedRankBasis>,
    pub signal_variance: f64,
    pub length_scale: f64,
}

impl PartialEq for ConstrainedKernel {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.basis, &other.basis)
            && self.signal_variance == other.signal_variance
            && self.length_scale == other.length_scale
    }
}

impl ConstrainedKernel {
    fn spectral_weights(&self) -> Vec<f64> {
        self.basis
            .eigenvalues()
            .iter()
            .map(|&lam| se_spectral_density_2d(self.signal_variance, self.length_scale, lam.sqrt()))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    /// Noise-free squared exponential with one length scale per input column.
    SquaredExponential {
        signal_variance: f64,
        length_scales: Vec<f64>,
    },
    /// Adds `noise_variance` on the matched-observation diagonal only.
    WhiteNoise { noise_variance: f64 },
    Sdof(SdofParams),
    Mdof(ModalSet),
    Sum { terms: Vec<Kernel> },
    Product { factors: Vec<Factor> },
    #[serde(skip)]
    Constrained(ConstrainedKernel),
}

/// What a hyperparameter means, used to derive data-driven bounds.
#[derive(Clone, Debug, PartialEq)]
pub enum ParamKind {
    SignalVariance,
    NoiseVariance,
    /// Length scale over the listed input columns (of the full input).
    LengthScale { dims: Vec<usize> },
    /// Natural frequency of mode `mode` out of `n_modes` in one oscillator kernel.
    NaturalFrequency { dim: usize, mode: usize, n_modes: usize },
    DampingRatio,
    /// Oscillator amplitude `a`; its scale is tied to frequency and damping.
    Amplitude { dim: usize, mode: usize, n_modes: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamInfo {
    pub name: String,
    pub kind: ParamKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum DimReq {
    Any,
    Exact(usize),
    AtLeast(usize),
}

impl DimReq {
    fn accepts(self, d: usize) -> bool {
        match self {
            DimReq::Any => true,
            DimReq::Exact(n) => d == n,
            DimReq::AtLeast(n) => d >= n,
        }
    }

    fn unify(self, other: DimReq) -> Option<DimReq> {
        use DimReq::*;
        match (self, other) {
            (Any, r) | (r, Any) => Some(r),
            (Exact(a), Exact(b)) => (a == b).then_some(Exact(a)),
            (Exact(a), AtLeast(b)) | (AtLeast(b), Exact(a)) => (a >= b).then_some(Exact(a)),
            (AtLeast(a), AtLeast(b)) => Some(AtLeast(a.max(b))),
        }
    }
}

impl Kernel {
    pub fn squared_exponential(signal_variance: f64, length_scales: Vec<f64>) -> Result<Kernel> {
        check_se(signal_variance, &length_scales)?;
        Ok(Kernel::SquaredExponential {
            signal_variance,
            length_scales,
        })
    }

    pub fn white_noise(noise_variance: f64) -> Result<Kernel> {
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(Error::invalid(format!(
                "noise variance must be finite and >= 0, got {noise_variance}"
            )));
        }
        Ok(Kernel::WhiteNoise { noise_variance })
    }

    /// Squared exponential plus its white-noise term, as a two-term sum.
    pub fn se_with_noise(params: &SeParams) -> Result<Kernel> {
        params.validate()?;
        combine_sum(vec![
            Kernel::squared_exponential(params.signal_variance, params.length_scales.clone())?,
            Kernel::white_noise(params.noise_variance)?,
        ])
    }

    pub fn sdof(params: SdofParams) -> Kernel {
        Kernel::Sdof(params)
    }

    pub fn mdof(modes: ModalSet) -> Kernel {
        Kernel::Mdof(modes)
    }

    pub fn constrained(basis: Arc<ReducedRankBasis>, signal_variance: f64, length_scale: f64) -> Result<Kernel> {
        check_se(signal_variance, &[length_scale])?;
        Ok(Kernel::Constrained(ConstrainedKernel {
            basis,
            signal_variance,
            length_scale,
        }))
    }

    /// Re-checks every invariant; used after deserializing a kernel tree.
    pub fn validate(&self) -> Result<()> {
        match self {
            Kernel::SquaredExponential {
                signal_variance,
                length_scales,
            } => check_se(*signal_variance, length_scales),
            Kernel::WhiteNoise { noise_variance } => Kernel::white_noise(*noise_variance).map(|_| ()),
            Kernel::Sdof(p) => SdofParams::new(p.natural_frequency, p.damping_ratio, p.amplitude).map(|_| ()),
            Kernel::Mdof(m) => ModalSet::new(m.modes().to_vec()).map(|_| ()),
            Kernel::Sum { terms } => {
                terms.iter().try_for_each(Kernel::validate)?;
                combine_sum(terms.clone()).map(|_| ())
            }
            Kernel::Product { factors } => {
                factors.iter().try_for_each(|f| f.kernel.validate())?;
                combine_product(factors.iter().map(|f| (f.kernel.clone(), f.slice.clone())).collect()).map(|_| ())
            }
            Kernel::Constrained(c) => check_se(c.signal_variance, &[c.length_scale]),
        }
    }

    fn dim_req(&self) -> DimReq {
        match self {
            Kernel::SquaredExponential { length_scales, .. } => DimReq::Exact(length_scales.len()),
            Kernel::WhiteNoise { .. } => DimReq::Any,
            Kernel::Sdof(_) | Kernel::Mdof(_) => DimReq::Exact(1),
            Kernel::Constrained(_) => DimReq::Exact(2),
            Kernel::Sum { terms } => terms
                .iter()
                .try_fold(DimReq::Any, |acc, t| acc.unify(t.dim_req()))
                .unwrap_or(DimReq::Any),
            Kernel::Product { factors } => {
                DimReq::AtLeast(factors.iter().flat_map(|f| f.slice.iter()).max().map_or(0, |m| m + 1))
            }
        }
    }

    /// Checks that inputs with `d` columns can be fed to this kernel.
    pub fn check_input_dim(&self, d: usize) -> Result<()> {
        if self.dim_req().accepts(d) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "kernel expects inputs of dimension {:?}, got {d}",
                self.dim_req()
            )))
        }
    }

    /// Scalar covariance between two points.
    pub fn eval(&self, xp: &[f64], xq: &[f64], same_index: bool) -> Result<f64> {
        if xp.len() != xq.len() {
            return Err(Error::invalid("points have different dimensions"));
        }
        self.check_input_dim(xp.len())?;
        self.eval_unchecked(xp, xq, same_index)
    }

    fn eval_unchecked(&self, xp: &[f64], xq: &[f64], same: bool) -> Result<f64> {
        Ok(match self {
            Kernel::SquaredExponential {
                signal_variance,
                length_scales,
            } => se_value(xp, xq, *signal_variance, length_scales),
            Kernel::WhiteNoise { noise_variance } => {
                if same {
                    *noise_variance
                } else {
                    0.0
                }
            }
            Kernel::Sdof(p) => sdof_value(xp[0] - xq[0], p),
            Kernel::Mdof(m) => m.modes().iter().map(|p| sdof_value(xp[0] - xq[0], p)).sum(),
            Kernel::Sum { terms } => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.eval_unchecked(xp, xq, same)?;
                }
                acc
            }
            Kernel::Product { factors } => {
                let mut acc = 1.0;
                for f in factors {
                    let a: Vec<f64> = f.slice.iter().map(|&i| xp[i]).collect();
                    let b: Vec<f64> = f.slice.iter().map(|&i| xq[i]).collect();
                    acc *= f.kernel.eval_unchecked(&a, &b, same)?;
                }
                acc
            }
            Kernel::Constrained(c) => {
                let fa = c.basis.features(xp)?;
                let fb = c.basis.features(xq)?;
                c.spectral_weights()
                    .iter()
                    .zip(fa.iter().zip(&fb))
                    .map(|(s, (a, b))| s * a * b)
                    .sum()
            }
        })
    }

    /// Gram matrix between two point sets.
    ///
    /// With `match_diagonal`, `rows` and `cols` are the same observations and
    /// element `(i, i)` carries any white-noise contribution.
    pub fn gram(&self, rows: &DMatrix<f64>, cols: &DMatrix<f64>, match_diagonal: bool) -> Result<DMatrix<f64>> {
        if rows.ncols() != cols.ncols() {
            return Err(Error::invalid(format!(
                "row inputs have {} columns, column inputs have {}",
                rows.ncols(),
                cols.ncols()
            )));
        }
        if match_diagonal && rows.nrows() != cols.nrows() {
            return Err(Error::invalid("match_diagonal requires equally many rows and columns"));
        }
        self.check_input_dim(rows.ncols())?;
        self.gram_unchecked(rows, cols, match_diagonal)
    }

    fn gram_unchecked(&self, rows: &DMatrix<f64>, cols: &DMatrix<f64>, sym: bool) -> Result<DMatrix<f64>> {
        match self {
            Kernel::SquaredExponential {
                signal_variance,
                length_scales,
            } => {
                if let [l] = length_scales.as_slice() {
                    let (sv, l) = (*signal_variance, *l);
                    return Ok(fill_1d(rows, cols, sym, |a, b| {
                        let u = a / l - b / l;
                        sv * (-0.5 * u * u).exp()
                    }));
                }
                let r = scaled_rows(rows, length_scales);
                let c = if sym { r.clone() } else { scaled_rows(cols, length_scales) };
                let d = length_scales.len();
                let sv = *signal_variance;
                Ok(fill(rows.nrows(), cols.nrows(), sym, |i, j| {
                    let (a, b) = (&r[i * d..(i + 1) * d], &c[j * d..(j + 1) * d]);
                    let r2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                    sv * (-0.5 * r2).exp()
                }))
            }
            Kernel::WhiteNoise { noise_variance } => {
                let mut g = DMatrix::zeros(rows.nrows(), cols.nrows());
                if sym {
                    g.fill_diagonal(*noise_variance);
                }
                Ok(g)
            }
            Kernel::Sdof(p) => Ok(fill_1d(rows, cols, sym, |a, b| sdof_value(a - b, p))),
            Kernel::Mdof(m) => Ok(fill_1d(rows, cols, sym, |a, b| {
                m.modes().iter().map(|p| sdof_value(a - b, p)).sum()
            })),
            Kernel::Sum { terms } => {
                let mut acc = DMatrix::zeros(rows.nrows(), cols.nrows());
                for t in terms {
                    acc += t.gram_unchecked(rows, cols, sym)?;
                }
                Ok(acc)
            }
            Kernel::Product { factors } => {
                let mut acc = DMatrix::from_element(rows.nrows(), cols.nrows(), 1.0);
                for f in factors {
                    let rs = rows.select_columns(f.slice.iter());
                    let cs = cols.select_columns(f.slice.iter());
                    acc.component_mul_assign(&f.kernel.gram_unchecked(&rs, &cs, sym)?);
                }
                Ok(acc)
            }
            Kernel::Constrained(c) => {
                let w = c.spectral_weights();
                let fr = c.basis.feature_matrix(rows)?;
                let g = if sym {
                    let mut a = fr.clone();
                    scale_columns(&mut a, &w.iter().map(|x| x.sqrt()).collect::<Vec<_>>());
                    &a * a.transpose()
                } else {
                    let fc = c.basis.feature_matrix(cols)?;
                    let mut a = fr;
                    scale_columns(&mut a, &w);
                    a * fc.transpose()
                };
                Ok(if sym { symmetrize(g) } else { g })
            }
        }
    }

    /// Number of free (log-space) hyperparameters.
    pub fn n_params(&self) -> usize {
        match self {
            Kernel::SquaredExponential { length_scales, .. } => 1 + length_scales.len(),
            Kernel::WhiteNoise { .. } => 1,
            Kernel::Sdof(_) => 3,
            Kernel::Mdof(m) => 3 * m.len(),
            Kernel::Sum { terms } => terms.iter().map(Kernel::n_params).sum(),
            Kernel::Product { factors } => factors.iter().map(|f| f.kernel.n_params()).sum(),
            Kernel::Constrained(_) => 2,
        }
    }

    /// Natural logarithms of all hyperparameters, in a fixed tree order.
    pub fn log_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.collect_params(&mut out);
        out.iter_mut().for_each(|v| *v = v.ln());
        out
    }

    /// Hyperparameters in natural units, same order as [`Kernel::log_params`].
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.collect_params(&mut out);
        out
    }

    fn collect_params(&self, out: &mut Vec<f64>) {
        match self {
            Kernel::SquaredExponential {
                signal_variance,
                length_scales,
            } => {
                out.push(*signal_variance);
                out.extend(length_scales);
            }
            Kernel::WhiteNoise { noise_variance } => out.push(*noise_variance),
            Kernel::Sdof(p) => out.extend([p.natural_frequency, p.damping_ratio, p.amplitude]),
            Kernel::Mdof(m) => {
                for p in m.modes() {
                    out.extend([p.natural_frequency, p.damping_ratio, p.amplitude]);
                }
            }
            Kernel::Sum { terms } => terms.iter().for_each(|t| t.collect_params(out)),
            Kernel::Product { factors } => factors.iter().for_each(|f| f.kernel.collect_params(out)),
            Kernel::Constrained(c) => out.extend([c.signal_variance, c.length_scale]),
        }
    }

    /// Same structure with hyperparameters replaced by `exp(log_params)`.
    pub fn with_log_params(&self, log_params: &[f64]) -> Result<Kernel> {
        let natural: Vec<f64> = log_params.iter().map(|v| v.exp()).collect();
        self.with_params(&natural)
    }

    /// Same structure with hyperparameters replaced (natural units).
    pub fn with_params(&self, params: &[f64]) -> Result<Kernel> {
        if params.len() != self.n_params() {
            return Err(Error::invalid(format!(
                "kernel has {} parameters, got {}",
                self.n_params(),
                params.len()
            )));
        }
        let mut it = params.iter().copied();
        self.rebuild(&mut it)
    }

    fn rebuild(&self, it: &mut impl Iterator<Item = f64>) -> Result<Kernel> {
        let mut next = || it.next().expect("parameter count checked by caller");
        Ok(match self {
            Kernel::SquaredExponential { length_scales, .. } => {
                let sv = next();
                let ls = (0..length_scales.len()).map(|_| next()).collect();
                Kernel::squared_exponential(sv, ls)?
            }
            Kernel::WhiteNoise { .. } => Kernel::white_noise(next())?,
            Kernel::Sdof(_) => Kernel::Sdof(SdofParams::new(next(), next(), next())?),
            Kernel::Mdof(m) => {
                let modes = (0..m.len())
                    .map(|_| SdofParams::new(next(), next(), next()))
                    .collect::<Result<Vec<_>>>()?;
                Kernel::Mdof(ModalSet::new(modes)?)
            }
            Kernel::Sum { terms } => Kernel::Sum {
                terms: terms.iter().map(|t| t.rebuild(it)).collect::<Result<_>>()?,
            },
            Kernel::Product { factors } => Kernel::Product {
                factors: factors
                    .iter()
                    .map(|f| {
                        Ok(Factor {
                            kernel: f.kernel.rebuild(it)?,
                            slice: f.slice.clone(),
                        })
                    })
                    .collect::<Result<_>>()?,
            },
            Kernel::Constrained(c) => Kernel::constrained(c.basis.clone(), next(), next())?,
        })
    }

    /// Name and meaning of every hyperparameter, same order as [`Kernel::log_params`].
    pub fn param_info(&self) -> Vec<ParamInfo> {
        let mut out = Vec::new();
        let n = match self.dim_req() {
            DimReq::Exact(n) | DimReq::AtLeast(n) => n,
            DimReq::Any => 0,
        };
        self.collect_info("", &(0..n.max(1)).collect::<Vec<_>>(), &mut out);
        out
    }

    fn collect_info(&self, prefix: &str, dims: &[usize], out: &mut Vec<ParamInfo>) {
        let mut push = |name: String, kind| out.push(ParamInfo { name, kind });
        match self {
            Kernel::SquaredExponential { length_scales, .. } => {
                push(format!("{prefix}se.signal_variance"), ParamKind::SignalVariance);
                for d in 0..length_scales.len() {
                    push(
                        format!("{prefix}se.length_scale[{d}]"),
                        ParamKind::LengthScale { dims: vec![dims[d]] },
                    );
                }
            }
            Kernel::WhiteNoise { .. } => push(format!("{prefix}white_noise.noise_variance"), ParamKind::NoiseVariance),
            Kernel::Sdof(_) => push_oscillator(&mut push, &format!("{prefix}sdof."), dims[0], 0, 1),
            Kernel::Mdof(m) => {
                for i in 0..m.len() {
                    push_oscillator(&mut push, &format!("{prefix}mdof.mode[{i}]."), dims[0], i, m.len());
                }
            }
            Kernel::Sum { terms } => {
                for (i, t) in terms.iter().enumerate() {
                    t.collect_info(&format!("{prefix}sum[{i}]."), dims, out);
                }
            }
            Kernel::Product { factors } => {
                for (i, f) in factors.iter().enumerate() {
                    let sub: Vec<usize> = f.slice.iter().map(|&s| dims.get(s).copied().unwrap_or(s)).collect();
                    f.kernel.collect_info(&format!("{prefix}product[{i}]."), &sub, out);
                }
            }
            Kernel::Constrained(_) => {
                push(format!("{prefix}constrained.signal_variance"), ParamKind::SignalVariance);
                push(
                    format!("{prefix}constrained.length_scale"),
                    ParamKind::LengthScale {
                        dims: dims[..2].to_vec(),
                    },
                );
            }
        }
    }

    /// Derivatives of `gram(x, x, true)` with respect to each log-hyperparameter.
    pub fn param_gradients(&self, x: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
        self.check_input_dim(x.ncols())?;
        let mut out = Vec::with_capacity(self.n_params());
        self.collect_gradients(x, &mut out)?;
        Ok(out)
    }

    fn collect_gradients(&self, x: &DMatrix<f64>, out: &mut Vec<DMatrix<f64>>) -> Result<()> {
        let n = x.nrows();
        match self {
            Kernel::SquaredExponential { length_scales, .. } => {
                let k = self.gram_unchecked(x, x, true)?;
                for (d, l) in length_scales.iter().enumerate() {
                    let col = x.column(d);
                    let g = DMatrix::from_fn(n, n, |i, j| {
                        let u = (col[i] - col[j]) / l;
                        k[(i, j)] * u * u
                    });
                    out.push(g);
                }
                out.insert(out.len() - length_scales.len(), k);
            }
            Kernel::WhiteNoise { noise_variance } => {
                out.push(DMatrix::from_diagonal_element(n, n, *noise_variance));
            }
            Kernel::Sdof(p) => push_oscillator_grads(x, p, out),
            Kernel::Mdof(m) => m.modes().iter().for_each(|p| push_oscillator_grads(x, p, out)),
            Kernel::Sum { terms } => {
                for t in terms {
                    t.collect_gradients(x, out)?;
                }
            }
            Kernel::Product { factors } => {
                let sliced: Vec<DMatrix<f64>> = factors.iter().map(|f| x.select_columns(f.slice.iter())).collect();
                let grams = factors
                    .iter()
                    .zip(&sliced)
                    .map(|(f, xs)| f.kernel.gram_unchecked(xs, xs, true))
                    .collect::<Result<Vec<_>>>()?;
                for (fi, f) in factors.iter().enumerate() {
                    let mut others = DMatrix::from_element(n, n, 1.0);
                    for (gi, g) in grams.iter().enumerate() {
                        if gi != fi {
                            others.component_mul_assign(g);
                        }
                    }
                    let mut local = Vec::new();
                    f.kernel.collect_gradients(&sliced[fi], &mut local)?;
                    out.extend(local.into_iter().map(|g| g.component_mul(&others)));
                }
            }
            Kernel::Constrained(c) => {
                let k = self.gram_unchecked(x, x, true)?;
                let l2 = c.length_scale * c.length_scale;
                let w: Vec<f64> = c
                    .spectral_weights()
                    .iter()
                    .zip(c.basis.eigenvalues())
                    .map(|(s, lam)| s * (2.0 - l2 * lam))
                    .collect();
                let phi = c.basis.feature_matrix(x)?;
                let mut a = phi.clone();
                scale_columns(&mut a, &w);
                out.push(k);
                out.push(symmetrize(a * phi.transpose()));
            }
        }
        Ok(())
    }
}

fn push_oscillator(push: &mut impl FnMut(String, ParamKind), prefix: &str, dim: usize, mode: usize, n_modes: usize) {
    push(format!("{prefix}natural_frequency"), ParamKind::NaturalFrequency { dim, mode, n_modes });
    push(format!("{prefix}damping_ratio"), ParamKind::DampingRatio);
    push(format!("{prefix}amplitude"), ParamKind::Amplitude { dim, mode, n_modes });
}

fn push_oscillator_grads(x: &DMatrix<f64>, p: &SdofParams, out: &mut Vec<DMatrix<f64>>) {
    let n = x.nrows();
    let (vals, idx) = distinct(x.column(0).as_slice());
    let u = vals.len();
    let mut table = vec![[0.0; 3]; u * u];
    for b in 0..u {
        for a in b..u {
            let d = sdof_log_gradient(vals[a] - vals[b], p);
            table[b * u + a] = d;
            table[a * u + b] = d;
        }
    }
    let mut g = [DMatrix::zeros(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
    for j in 0..n {
        for i in j..n {
            let d = table[idx[j] * u + idx[i]];
            for k in 0..3 {
                g[k][(i, j)] = d[k];
                g[k][(j, i)] = d[k];
            }
        }
    }
    out.extend(g);
}

/// Sorted distinct values of `v` and, for each element, its position among them.
fn distinct(v: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut vals = v.to_vec();
    vals.sort_by(f64::total_cmp);
    vals.dedup_by(|a, b| a.to_bits() == b.to_bits());
    let idx = v
        .iter()
        .map(|x| vals.binary_search_by(|p| p.total_cmp(x)).expect("value is present"))
        .collect();
    (vals, idx)
}

/// Gram of a kernel that reads one input column, evaluated once per pair of
/// distinct values. Gridded inputs repeat values heavily.
fn fill_1d(rows: &DMatrix<f64>, cols: &DMatrix<f64>, sym: bool, f: impl Fn(f64, f64) -> f64) -> DMatrix<f64> {
    let (rv, ri) = distinct(rows.column(0).as_slice());
    let (cv, ci) = if sym { (rv.clone(), ri.clone()) } else { distinct(cols.column(0).as_slice()) };
    let table = DMatrix::from_fn(rv.len(), cv.len(), |a, b| f(rv[a], cv[b]));
    fill(rows.nrows(), cols.nrows(), sym, |i, j| table[(ri[i], ci[j])])
}

/// Input rows divided elementwise by the length scales, row-major.
fn scaled_rows(x: &DMatrix<f64>, length_scales: &[f64]) -> Vec<f64> {
    let d = x.ncols();
    let mut out = vec![0.0; x.nrows() * d];
    for (k, l) in length_scales.iter().enumerate() {
        for (i, v) in x.column(k).iter().enumerate() {
            out[i * d + k] = v / l;
        }
    }
    out
}

fn fill(nr: usize, nc: usize, sym: bool, f: impl Fn(usize, usize) -> f64) -> DMatrix<f64> {
    if sym {
        let mut g = DMatrix::zeros(nr, nc);
        for j in 0..nc {
            for i in j..nr {
                let v = f(i, j);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    } else {
        DMatrix::from_fn(nr, nc, f)
    }
}

fn scale_columns(a: &mut DMatrix<f64>, w: &[f64]) {
    for (mut col, s) in a.column_iter_mut().zip(w) {
        col *= *s;
    }
}

/// Copies the lower triangle onto the upper so the result is exactly symmetric.
fn symmetrize(mut g: DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows();
    for j in 0..n {
        for i in j + 1..n {
            g[(j, i)] = g[(i, j)];
        }
    }
    g
}

/// Sum of kernels over a shared input; the Gram is the elementwise sum.
pub fn combine_sum(kernels: Vec<Kernel>) -> Result<Kernel> {
    if kernels.is_empty() {
        return Err(Error::invalid("sum of an empty kernel list"));
    }
    kernels
        .iter()
        .try_fold(DimReq::Any, |acc, k| acc.unify(k.dim_req()))
        .ok_or_else(|| Error::invalid("summed kernels disagree on input dimension"))?;
    Ok(Kernel::Sum { terms: kernels })
}

/// Product of kernels, each reading its own disjoint slice of input columns.
pub fn combine_product(factors: Vec<(Kernel, Vec<usize>)>) -> Result<Kernel> {
    if factors.is_empty() {
        return Err(Error::invalid("product of an empty factor list"));
    }
    let mut seen = std::collections::BTreeSet::new();
    for (k, slice) in &factors {
        if slice.is_empty() {
            return Err(Error::invalid("product factor with an empty input slice"));
        }
        for &d in slice {
            if !seen.insert(d) {
                return Err(Error::invalid(format!("input column {d} appears in more than one product factor")));
            }
        }
        if !k.dim_req().accepts(slice.len()) {
            return Err(Error::invalid(format!(
                "factor expects inputs of dimension {:?} but its slice has {} columns",
                k.dim_req(),
                slice.len()
            )));
        }
    }
    Ok(Kernel::Product {
        factors: factors.into_iter().map(|(kernel, slice)| Factor { kernel, slice }).collect(),
    })
}

/// Free-function form of [`Kernel::gram`].
pub fn gram(kernel: &Kernel, rows: &DMatrix<f64>, cols: &DMatrix<f64>, match_diagonal: bool) -> Result<DMatrix<f64>> {
    kernel.gram(rows, cols, match_diagonal)
}

/// Free-function form of [`Kernel::param_gradients`].
pub fn kernel_param_gradient(kernel: &Kernel, x: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
    kernel.param_gradients(x)
}

#[cfg(test)]
mod tests;
