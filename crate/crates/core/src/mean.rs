//! Prior mean functions.

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MeanFunction {
    #[default]
    Zero,
    /// `m(x) = intercept + sum_k weights[k] * x[covariate_slice[k]]`.
    Linear {
        weights: Vec<f64>,
        intercept: f64,
        covariate_slice: Vec<usize>,
    },
}

impl MeanFunction {
    pub fn linear(weights: Vec<f64>, intercept: f64, covariate_slice: Vec<usize>) -> Result<MeanFunction> {
        let m = MeanFunction::Linear {
            weights,
            intercept,
            covariate_slice,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MeanFunction::Zero => Ok(()),
            MeanFunction::Linear {
                weights,
                intercept,
                covariate_slice,
            } => {
                if weights.len() != covariate_slice.len() {
                    return Err(Error::invalid(format!(
                        "linear mean has {} weights for {} covariates",
                        weights.len(),
                        covariate_slice.len()
                    )));
                }
                if !intercept.is_finite() || weights.iter().any(|w| !w.is_finite()) {
                    return Err(Error::invalid("linear mean coefficients must be finite"));
                }
                Ok(())
            }
        }
    }

    /// Mean at every row of `x`.
    pub fn eval(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        match self {
            MeanFunction::Zero => Ok(DVector::zeros(x.nrows())),
            MeanFunction::Linear {
                weights,
                intercept,
                covariate_slice,
            } => {
                check_slice(covariate_slice, x.ncols())?;
                Ok(DVector::from_fn(x.nrows(), |r, _| {
                    intercept
                        + weights
                            .iter()
                            .zip(covariate_slice)
                            .map(|(w, &c)| w * x[(r, c)])
                            .sum::<f64>()
                }))
            }
        }
    }
}

pub fn eval_mean(m: &MeanFunction, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    m.eval(x)
}

fn check_slice(slice: &[usize], d: usize) -> Result<()> {
    match slice.iter().find(|&&c| c >= d) {
        Some(c) => Err(Error::invalid(format!(
            "covariate column {c} out of range for {d}-dimensional inputs"
        ))),
        None => Ok(()),
    }
}

/// Ordinary least-squares affine fit of `y` on the columns `covariate_slice` of `x`.
pub fn fit_linear_mean(x: &DMatrix<f64>, y: &DVector<f64>, covariate_slice: &[usize]) -> Result<MeanFunction> {
    check_slice(covariate_slice, x.ncols())?;
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::invalid(format!("{n} input rows but {} targets", y.len())));
    }
    let p = covariate_slice.len();
    if n < p + 1 {
        return Err(Error::DegenerateData(format!(
            "{n} points cannot determine an affine fit in {p} covariates"
        )));
    }
    // Centering removes the intercept column and keeps the design well scaled.
    let cov = x.select_columns(covariate_slice);
    let centres = DVector::from_fn(p, |k, _| cov.column(k).mean());
    let mut design = cov;
    for (k, c) in centres.iter().enumerate() {
        design.column_mut(k).add_scalar_mut(-c);
    }
    let ybar = y.mean();
    let yc = y.add_scalar(-ybar);

    let weights = if p == 0 {
        DVector::zeros(0)
    } else {
        let svd = SVD::new(design, true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smax == 0.0 || smin <= smax * (n as f64) * f64::EPSILON * 16.0 {
            return Err(Error::DegenerateData(format!(
                "covariate design is rank deficient (singular values {smin:e} / {smax:e})"
            )));
        }
        svd.solve(&yc, 0.0).map_err(|e| Error::Numeric(e.to_string()))?
    };
    let intercept = ybar - weights.dot(&centres);
    MeanFunction::linear(weights.iter().copied().collect(), intercept, covariate_slice.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_points, random_vector};
    use proptest::prelude::*;

    #[test]
    fn zero_mean_is_zero() {
        let x = random_points(7, 3, 1, 5.0);
        assert_eq!(MeanFunction::Zero.eval(&x).unwrap(), DVector::zeros(7));
    }

    #[test]
    fn linear_evaluation() {
        let m = MeanFunction::linear(vec![2.0], 1.0, vec![0]).unwrap();
        let x = DMatrix::from_row_slice(1, 1, &[3.0]);
        assert_eq!(m.eval(&x).unwrap()[0], 7.0);
        let x2 = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let m = MeanFunction::linear(vec![2.0], 1.0, vec![2]).unwrap();
        assert!(matches!(m.eval(&x2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn exact_affine_data_is_recovered() {
        let x = random_points(20, 1, 3, 10.0);
        let y = x.column(0).map(|v| 3.0 * v + 2.0);
        let m = fit_linear_mean(&x, &y, &[0]).unwrap();
        let MeanFunction::Linear { weights, intercept, .. } = &m else { unreachable!() };
        assert!((weights[0] - 3.0).abs() < 1e-10);
        assert!((intercept - 2.0).abs() < 1e-10);
        let resid = &y - m.eval(&x).unwrap();
        assert!(resid.amax() < 1e-10);
    }

    #[test]
    fn constant_targets_give_flat_fit() {
        let x = random_points(10, 2, 4, 1.0);
        let y = DVector::from_element(10, 4.5);
        let MeanFunction::Linear { weights, intercept, .. } = fit_linear_mean(&x, &y, &[0, 1]).unwrap() else {
            unreachable!()
        };
        assert!(weights.iter().all(|w| w.abs() < 1e-12));
        assert!((intercept - 4.5).abs() < 1e-12);
    }

    #[test]
    fn matches_normal_equations() {
        let x = random_points(40, 3, 5, 4.0);
        let noise = random_vector(40, 6);
        let y = DVector::from_fn(40, |r, _| 1.5 - 0.7 * x[(r, 0)] + 0.2 * x[(r, 2)] + 0.3 * noise[r]);
        let m = fit_linear_mean(&x, &y, &[0, 2]).unwrap();

        let a = DMatrix::from_fn(40, 3, |r, c| match c {
            0 => 1.0,
            1 => x[(r, 0)],
            _ => x[(r, 2)],
        });
        let beta = (a.transpose() * &a).lu().solve(&(a.transpose() * &y)).unwrap();
        let MeanFunction::Linear { weights, intercept, .. } = m else { unreachable!() };
        assert!((intercept - beta[0]).abs() < 1e-8);
        assert!((weights[0] - beta[1]).abs() < 1e-8);
        assert!((weights[1] - beta[2]).abs() < 1e-8);
    }

    #[test]
    fn rank_deficient_design_rejected() {
        let x = DMatrix::from_element(5, 1, 2.0);
        let y = random_vector(5, 1);
        assert!(matches!(fit_linear_mean(&x, &y, &[0]), Err(Error::DegenerateData(_))));
        // two identical covariate columns
        let c = random_points(6, 1, 2, 1.0);
        let x = DMatrix::from_fn(6, 2, |r, _| c[(r, 0)]);
        let y = random_vector(6, 2);
        assert!(matches!(fit_linear_mean(&x, &y, &[0, 1]), Err(Error::DegenerateData(_))));
    }

    proptest! {
        #[test]
        fn linear_mean_is_affine(
            w in proptest::collection::vec(-5.0f64..5.0, 2),
            b in -5.0f64..5.0,
            p in proptest::collection::vec(-10.0f64..10.0, 4),
            alpha in 0.0f64..1.0,
        ) {
            let m = MeanFunction::linear(w, b, vec![0, 1]).unwrap();
            let x1 = DMatrix::from_row_slice(1, 2, &p[..2]);
            let x2 = DMatrix::from_row_slice(1, 2, &p[2..]);
            let mix = &x1 * alpha + &x2 * (1.0 - alpha);
            let lhs = m.eval(&mix).unwrap()[0];
            let rhs = alpha * m.eval(&x1).unwrap()[0] + (1.0 - alpha) * m.eval(&x2).unwrap()[0];
            prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
        }
    }
}
